#pragma once

#include "ddopg/policy.hpp"
#include "ddopg/replay.hpp"

#include <memory>
#include <unordered_map>
#include <vector>

namespace ddopg {

enum class WeightNormalization {
  PerCount,        // divide the weighted return sum by the support size N
  SelfNormalized,  // divide by the sum of weights
};

struct SurrogateConfig {
  EvalNoise noise;
  WeightNormalization normalization = WeightNormalization::SelfNormalized;
  double penalty_factor = 0.05;  // scales the ESS penalty
  double return_bound = 0.0;     // scale of returns, from Env::max_return()
};

// Concentration-style choice of the penalty factor: sqrt((1 - delta)/delta)
// for confidence level 1 - delta, delta in (0, 1).
double penalty_factor_from_confidence(double delta);

struct SupportItem {
  std::shared_ptr<const Trajectory> traj;
  std::shared_ptr<const PolicyParams> behavior;
  // Cache identities; negative means "do not cache this pair".
  long traj_id = -1;
  long behavior_id = -1;
};

// Memo for per-(trajectory, behavior) log-likelihoods. Values depend on the
// evaluation noise, so a noise change flushes everything. Persist one cache
// across outer iterations; only new pairs cost network passes.
class PairLogLikCache {
 public:
  bool get(long traj_id, long behavior_id, const EvalNoise& noise, double* out) const;
  void put(long traj_id, long behavior_id, const EvalNoise& noise, double value);
  int size() const { return static_cast<int>(map_.size()); }
  long hits() const { return hits_; }

 private:
  std::unordered_map<std::uint64_t, double> map_;
  EvalNoise noise_;
  bool has_noise_ = false;
  mutable long hits_ = 0;
};

// A selected support multiset, grouped by distinct (trajectory, behavior)
// pair. Duplicates from with-replacement selection become integer counts, so
// every batched pass runs over distinct trajectories only. The mixture
// log-density of each trajectory under the behavior snapshots is
// precomputed here; only the target-policy likelihoods depend on theta.
struct SupportSet {
  std::vector<SupportItem> distinct;   // first-occurrence order
  RealVec counts;                      // multiplicities, sum == num_entries
  std::vector<int> entry_to_distinct;  // per original selection slot
  RealVec returns;                     // per distinct, the trajectories' discounted returns
  EvalNoise noise;
  TrajBatch batch;                     // concatenated distinct trajectories

  // Per distinct trajectory i: m_i = max_j L_ij and
  // lsm_i = log sum_j counts_j * exp(L_ij - m_i), where L_ij is the log
  // likelihood of trajectory i under behavior j. The mixture term of the
  // importance weight is m_i + lsm_i - log N.
  RealVec m;
  RealVec lsm;
  double log_n = 0.0;

  int num_entries() const { return static_cast<int>(entry_to_distinct.size()); }
  int num_distinct() const { return static_cast<int>(distinct.size()); }
  RealVec expand(const RealVec& per_distinct) const;
};

SupportSet build_support(std::vector<SupportItem> items, const EvalNoise& noise,
                         PairLogLikCache* cache = nullptr);
SupportSet build_support(const ReplayBuffer& buffer, const std::vector<int>& indices,
                         const EvalNoise& noise, PairLogLikCache* cache = nullptr);

// Mean discounted return of a trajectory set.
double mc_return(const RealVec& returns);
double mc_return(const std::vector<Trajectory>& trajs);

// Per-entry log importance weights of the support under the target policy:
// log w_e = L_e(theta) - log( (1/N) sum_f exp(L at behavior f) ). When the
// target coincides with the single behavior behind every entry, this is
// exactly zero, not merely close to it.
RealVec log_surrogate_weights(const SupportSet& support, const PolicyParams& target);

// (sum w)^2 / sum w^2 on sum-normalized weights: N for uniform weights, 1
// for a one-point mass, 0 for an empty or all-zero weight vector.
double effective_sample_size(const RealVec& log_weights);

// -return_bound * penalty_factor / sqrt(ess); -inf at ess == 0.
double penalty_term(double ess, double return_bound, double penalty_factor);

struct SurrogateValue {
  double value = 0.0;
  bool no_support = false;  // every weight underflowed to zero
};

SurrogateValue surrogate_return(const SupportSet& support, const PolicyParams& target,
                                const SurrogateConfig& cfg);
RealVec surrogate_grad(const SupportSet& support, const PolicyParams& target,
                       const SurrogateConfig& cfg);

// Surrogate + ESS penalty and, optionally, its exact gradient. The gradient
// of both terms shares one network backward pass; this is the inner-loop
// hot path.
struct ObjectiveEval {
  double surrogate = 0.0;
  double ess = 0.0;
  double penalty = 0.0;
  double objective = 0.0;
  bool no_support = false;
  RealVec grad;  // empty unless requested
};

ObjectiveEval eval_penalized_objective(const SupportSet& support, const PolicyParams& target,
                                       const SurrogateConfig& cfg, bool want_grad);

double lower_bound(const SupportSet& support, const PolicyParams& target,
                   const SurrogateConfig& cfg);

}  // namespace ddopg
