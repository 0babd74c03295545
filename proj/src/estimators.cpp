#include "ddopg/estimators.hpp"

#include <cmath>
#include <limits>

namespace ddopg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double penalty_factor_from_confidence(double delta) {
  detail::require(delta > 0.0 && delta < 1.0, "penalty factor: delta outside (0, 1)");
  return std::sqrt((1.0 - delta) / delta);
}

bool PairLogLikCache::get(long traj_id, long behavior_id, const EvalNoise& noise,
                          double* out) const {
  if (traj_id < 0 || behavior_id < 0 || !has_noise_ || noise_ != noise) return false;
  const auto it = map_.find((static_cast<std::uint64_t>(traj_id) << 32) ^
                            static_cast<std::uint64_t>(behavior_id));
  if (it == map_.end()) return false;
  *out = it->second;
  ++hits_;
  return true;
}

void PairLogLikCache::put(long traj_id, long behavior_id, const EvalNoise& noise, double value) {
  if (traj_id < 0 || behavior_id < 0) return;
  if (!has_noise_ || noise_ != noise) {
    map_.clear();
    noise_ = noise;
    has_noise_ = true;
  }
  map_[(static_cast<std::uint64_t>(traj_id) << 32) ^ static_cast<std::uint64_t>(behavior_id)] =
      value;
}

RealVec SupportSet::expand(const RealVec& per_distinct) const {
  detail::require(per_distinct.size() == num_distinct(), "support: expand size mismatch");
  RealVec out(num_entries());
  for (int e = 0; e < num_entries(); ++e)
    out[e] = per_distinct[entry_to_distinct[static_cast<size_t>(e)]];
  return out;
}

SupportSet build_support(std::vector<SupportItem> items, const EvalNoise& noise,
                         PairLogLikCache* cache) {
  detail::require(!items.empty(), "build_support: empty selection");
  SupportSet s;
  s.noise = noise;

  // Group duplicates; identity is the (trajectory, behavior) object pair.
  std::vector<double> counts;
  for (SupportItem& item : items) {
    detail::require(item.traj != nullptr && item.behavior != nullptr,
                    "build_support: null item");
    int slot = -1;
    for (int d = 0; d < static_cast<int>(s.distinct.size()); ++d) {
      if (s.distinct[static_cast<size_t>(d)].traj.get() == item.traj.get() &&
          s.distinct[static_cast<size_t>(d)].behavior.get() == item.behavior.get()) {
        slot = d;
        break;
      }
    }
    if (slot < 0) {
      slot = static_cast<int>(s.distinct.size());
      s.distinct.push_back(item);
      counts.push_back(0.0);
    }
    counts[static_cast<size_t>(slot)] += 1.0;
    s.entry_to_distinct.push_back(slot);
  }
  const int d = s.num_distinct();
  const int n = s.num_entries();
  s.counts = Eigen::Map<const RealVec>(counts.data(), d);
  s.log_n = std::log(static_cast<double>(n));

  s.returns.resize(d);
  std::vector<const Trajectory*> ptrs;
  ptrs.reserve(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    s.returns[i] = s.distinct[static_cast<size_t>(i)].traj->ret;
    ptrs.push_back(s.distinct[static_cast<size_t>(i)].traj.get());
  }
  s.batch = TrajBatch(ptrs);

  // L_ij = log likelihood of distinct trajectory i under distinct behavior
  // j. Columns with many cache misses are evaluated in one batched pass;
  // scattered misses go trajectory-by-trajectory. Both paths produce
  // bitwise identical values (row-local densities, row-ordered sums).
  RealMat lik(d, d);
  for (int j = 0; j < d; ++j) {
    const SupportItem& bj = s.distinct[static_cast<size_t>(j)];
    std::vector<int> missing;
    for (int i = 0; i < d; ++i) {
      const SupportItem& ti = s.distinct[static_cast<size_t>(i)];
      double v = 0.0;
      if (cache != nullptr && cache->get(ti.traj_id, bj.behavior_id, noise, &v)) {
        lik(i, j) = v;
      } else {
        missing.push_back(i);
      }
    }
    if (missing.empty()) continue;
    if (static_cast<int>(missing.size()) * 2 > d) {
      const RealVec col = s.batch.eval(*bj.behavior, noise).log_liks;
      for (int i : missing) lik(i, j) = col[i];
    } else {
      for (int i : missing)
        lik(i, j) = traj_log_lik(*bj.behavior, noise, *s.distinct[static_cast<size_t>(i)].traj);
    }
    if (cache != nullptr)
      for (int i : missing)
        cache->put(s.distinct[static_cast<size_t>(i)].traj_id, bj.behavior_id, noise, lik(i, j));
  }

  s.m.resize(d);
  s.lsm.resize(d);
  for (int i = 0; i < d; ++i) {
    s.m[i] = lik.row(i).maxCoeff();
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += s.counts[j] * std::exp(lik(i, j) - s.m[i]);
    s.lsm[i] = std::log(acc);
  }
  return s;
}

SupportSet build_support(const ReplayBuffer& buffer, const std::vector<int>& indices,
                         const EvalNoise& noise, PairLogLikCache* cache) {
  std::vector<SupportItem> items;
  items.reserve(indices.size());
  for (int idx : indices) {
    const ReplayEntry& e = buffer.entry(idx);
    items.push_back(SupportItem{e.traj, e.behavior, idx, idx});
  }
  return build_support(std::move(items), noise, cache);
}

double mc_return(const RealVec& returns) {
  detail::require(returns.size() > 0, "mc_return: empty set");
  return returns.sum() / static_cast<double>(returns.size());
}

double mc_return(const std::vector<Trajectory>& trajs) {
  detail::require(!trajs.empty(), "mc_return: empty set");
  double acc = 0.0;
  for (const Trajectory& t : trajs) acc += t.ret;
  return acc / static_cast<double>(trajs.size());
}

namespace {

// log w per distinct trajectory given the target log likelihoods.
RealVec log_weights_from_liks(const SupportSet& s, const RealVec& target_liks) {
  return (((target_liks - s.m) - s.lsm).array() + s.log_n).matrix();
}

struct WeightState {
  RealVec log_w;  // per distinct
  RealVec u;      // exp(log_w - max), zero vector when no support
  double sum_cu = 0.0;
  double sum_cu2 = 0.0;
  bool no_support = false;
};

WeightState weight_state(const SupportSet& s, const RealVec& log_w) {
  WeightState ws;
  ws.log_w = log_w;
  const double mx = log_w.maxCoeff();
  if (mx == -kInf) {
    ws.u = RealVec::Zero(s.num_distinct());
    ws.no_support = true;
    return ws;
  }
  detail::require(std::isfinite(mx), "surrogate: non-finite log weight");
  ws.u = (log_w.array() - mx).exp().matrix();
  ws.sum_cu = (s.counts.array() * ws.u.array()).sum();
  ws.sum_cu2 = (s.counts.array() * ws.u.array().square()).sum();
  return ws;
}

}  // namespace

RealVec log_surrogate_weights(const SupportSet& support, const PolicyParams& target) {
  const RealVec liks = support.batch.eval(target, support.noise).log_liks;
  return support.expand(log_weights_from_liks(support, liks));
}

double effective_sample_size(const RealVec& log_weights) {
  if (log_weights.size() == 0) return 0.0;
  const double mx = log_weights.maxCoeff();
  if (mx == -kInf) return 0.0;
  detail::require(std::isfinite(mx), "ess: non-finite log weight");
  const RealVec u = (log_weights.array() - mx).exp().matrix();
  const double su = u.sum();
  const double su2 = u.squaredNorm();
  return su * su / su2;
}

double penalty_term(double ess, double return_bound, double penalty_factor) {
  detail::require(ess >= 0.0, "penalty: negative ess");
  detail::require(return_bound >= 0.0 && penalty_factor >= 0.0,
                  "penalty: bound and factor must be nonnegative");
  if (ess == 0.0) return -kInf;
  return -return_bound * penalty_factor / std::sqrt(ess);
}

namespace {

// Shared implementation: one target evaluation feeds value, ESS, penalty,
// and (optionally) the exact gradient of surrogate + penalty through a
// single weighted VJP.
ObjectiveEval evaluate(const SupportSet& s, const PolicyParams& target, const SurrogateConfig& cfg,
                       bool with_penalty, bool want_grad) {
  detail::require(cfg.noise == s.noise, "surrogate: config noise differs from support noise");
  const auto ev = s.batch.eval(target, s.noise);
  const WeightState ws = weight_state(s, log_weights_from_liks(s, ev.log_liks));

  ObjectiveEval out;
  if (ws.no_support) {
    out.no_support = true;
    out.surrogate = 0.0;
    out.ess = 0.0;
    out.penalty = penalty_term(0.0, cfg.return_bound, cfg.penalty_factor);
    out.objective = with_penalty ? out.penalty : out.surrogate;
    if (want_grad) out.grad = RealVec::Zero(target.theta.size());
    return out;
  }

  const int d = s.num_distinct();
  const double n = static_cast<double>(s.num_entries());

  // Sum-normalized weights drive ESS in both modes; only the return
  // estimate changes between per-count and self-normalized.
  const RealVec w_bar = ws.u / ws.sum_cu;
  const double s2 = ws.sum_cu2 / (ws.sum_cu * ws.sum_cu);
  out.ess = 1.0 / s2;

  RealVec coeff = RealVec::Zero(d);  // per-distinct weight on grad L_i(theta)
  if (cfg.normalization == WeightNormalization::SelfNormalized) {
    out.surrogate = (s.counts.array() * w_bar.array() * s.returns.array()).sum();
    if (want_grad)
      coeff = (s.counts.array() * w_bar.array() * (s.returns.array() - out.surrogate)).matrix();
  } else {
    const RealVec w = ws.log_w.array().exp().matrix();
    detail::require(w.allFinite(), "surrogate: weight overflow in per-count mode");
    out.surrogate = (s.counts.array() * w.array() * s.returns.array()).sum() / n;
    if (want_grad) coeff = (s.counts.array() * w.array() * s.returns.array() / n).matrix();
  }
  detail::require(std::isfinite(out.surrogate), "surrogate: non-finite return estimate");

  out.penalty = penalty_term(out.ess, cfg.return_bound, cfg.penalty_factor);
  out.objective = with_penalty ? out.surrogate + out.penalty : out.surrogate;

  if (want_grad) {
    if (with_penalty && cfg.return_bound * cfg.penalty_factor > 0.0) {
      const double k = cfg.return_bound * cfg.penalty_factor;
      const double sqrt_s2 = std::sqrt(s2);
      coeff.array() -=
          (k / sqrt_s2) * (s.counts.array() * (w_bar.array().square() - s2 * w_bar.array()));
    }
    out.grad = s.batch.weighted_grad_per_traj(target, ev, coeff);
    detail::require(out.grad.allFinite(), "surrogate: non-finite gradient");
  }
  return out;
}

}  // namespace

SurrogateValue surrogate_return(const SupportSet& support, const PolicyParams& target,
                                const SurrogateConfig& cfg) {
  const ObjectiveEval ev = evaluate(support, target, cfg, /*with_penalty=*/false,
                                    /*want_grad=*/false);
  return SurrogateValue{ev.surrogate, ev.no_support};
}

RealVec surrogate_grad(const SupportSet& support, const PolicyParams& target,
                       const SurrogateConfig& cfg) {
  SurrogateConfig bare = cfg;
  bare.penalty_factor = 0.0;
  return evaluate(support, target, bare, /*with_penalty=*/false, /*want_grad=*/true).grad;
}

ObjectiveEval eval_penalized_objective(const SupportSet& support, const PolicyParams& target,
                                       const SurrogateConfig& cfg, bool want_grad) {
  return evaluate(support, target, cfg, /*with_penalty=*/true, want_grad);
}

double lower_bound(const SupportSet& support, const PolicyParams& target,
                   const SurrogateConfig& cfg) {
  return eval_penalized_objective(support, target, cfg, /*want_grad=*/false).objective;
}

}  // namespace ddopg
