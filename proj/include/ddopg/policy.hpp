#pragma once

#include "ddopg/numkit.hpp"
#include "ddopg/trajectory.hpp"

#include <string>
#include <vector>

namespace ddopg {

// Deterministic mean network. The stochastic object everything downstream
// scores against is N(a | mu_theta(s), Sigma) with fixed diagonal Sigma.
struct PolicyParams {
  MlpSpec spec;
  RealVec theta;
};

// Diagonal covariance via log variances, one per action dimension. Entries
// of Sigma are variances, not standard deviations.
struct EvalNoise {
  RealVec log_var;

  static EvalNoise isotropic(int action_dim, double log_variance);
  bool operator==(const EvalNoise&) const = default;
};

PolicyParams make_policy(const MlpSpec& spec, Rng& rng);

// Deterministic action mu_theta(s).
RealVec act(const PolicyParams& params, const RealVec& state);

// log N(action | mu_theta(state), diag(exp(log_var)))
double action_log_density(const PolicyParams& params, const EvalNoise& noise,
                          const RealVec& state, const RealVec& action);

// L_i(theta) = sum_t log N(a_t | mu_theta(s_t), Sigma) over one trajectory.
double traj_log_lik(const PolicyParams& params, const EvalNoise& noise, const Trajectory& traj);
RealVec traj_log_lik_grad(const PolicyParams& params, const EvalNoise& noise,
                          const Trajectory& traj);

// Concatenated view over a set of trajectories so that every likelihood and
// gradient query is a single batched network pass. Per-step log densities
// are row-local and trajectory sums run in row order, so values are bitwise
// identical whether a trajectory is scored alone or inside a larger batch.
class TrajBatch {
 public:
  TrajBatch() = default;
  explicit TrajBatch(const std::vector<const Trajectory*>& trajs);

  int num_trajs() const { return static_cast<int>(row_begin_.size()) - 1; }
  int total_rows() const { return static_cast<int>(states_.rows()); }
  int state_dim() const { return static_cast<int>(states_.cols()); }
  int action_dim() const { return static_cast<int>(actions_.cols()); }

  struct Eval {
    RealVec log_liks;      // per trajectory, in construction order
    RealMat scaled_resid;  // rows x A: (a - mu) / var, the d(logdens)/d(mu) rows
    MlpTape tape;
  };

  Eval eval(const PolicyParams& params, const EvalNoise& noise) const;

  // sum over rows of coeff_row * d(log density_row)/d(theta), one VJP pass.
  RealVec weighted_grad(const PolicyParams& params, const Eval& eval,
                        const RealVec& row_coeffs) const;
  // Same with one coefficient per trajectory applied to all its rows, i.e.
  // sum_i c_i * grad L_i(theta).
  RealVec weighted_grad_per_traj(const PolicyParams& params, const Eval& eval,
                                 const RealVec& traj_coeffs) const;

  RealVec expand_to_rows(const RealVec& traj_values) const;

 private:
  RealMat states_;   // total_rows x S
  RealMat actions_;  // total_rows x A
  std::vector<int> row_begin_;  // size num_trajs + 1
};

void save_policy(const std::string& path, const PolicyParams& params);
PolicyParams load_policy(const std::string& path);

}  // namespace ddopg
