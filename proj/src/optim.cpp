#include "ddopg/optim.hpp"

#include <cmath>
#include <vector>

namespace ddopg {

AdamState make_adam_state(Eigen::Index dim) {
  AdamState s;
  s.m = RealVec::Zero(dim);
  s.v = RealVec::Zero(dim);
  return s;
}

RealVec adam_step(AdamState& state, const AdamConfig& cfg, const RealVec& params,
                  const RealVec& grad) {
  detail::require(params.size() == grad.size(), "adam: param/grad size mismatch");
  detail::require(state.m.size() == params.size(), "adam: state size mismatch");
  detail::require(cfg.lr > 0.0 && cfg.eps > 0.0, "adam: lr and eps must be positive");
  detail::require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
                  "adam: betas must lie in [0, 1)");

  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = (cfg.beta2 * state.v.array() + (1.0 - cfg.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const RealVec m_hat = state.m / bc1;
  const RealVec v_hat = state.v / bc2;
  return params.array() + cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
}

InnerLoopResult optimize_lower_bound(const PolicyParams& start, const SupportSet& support,
                                     const SurrogateConfig& cfg, const InnerLoopConfig& loop) {
  detail::require(loop.max_steps >= 0, "inner loop: negative step budget");
  detail::require(loop.improve_window > 0, "inner loop: window must be positive");

  InnerLoopResult res;
  res.params = start;
  res.objective = -std::numeric_limits<double>::infinity();

  PolicyParams theta = start;
  AdamState adam = make_adam_state(start.theta.size());
  std::vector<double> best_history;

  for (int k = 0;; ++k) {
    const bool last = k == loop.max_steps;
    const ObjectiveEval ev = eval_penalized_objective(support, theta, cfg, !last);
    if (ev.objective > res.objective || k == 0) {
      // k == 0 keeps the start returnable even when its objective is -inf.
      res.objective = ev.objective;
      res.params = theta;
    }
    best_history.push_back(res.objective);
    res.steps_taken = k;

    if (last) {
      res.stop_reason = "max_steps";
      break;
    }
    if (ev.grad.lpNorm<Eigen::Infinity>() < loop.grad_tol) {
      res.stop_reason = "grad_tol";
      break;
    }
    const int lookback = static_cast<int>(best_history.size()) - 1 - loop.improve_window;
    if (lookback >= 0 &&
        res.objective - best_history[static_cast<size_t>(lookback)] < loop.improve_tol) {
      res.stop_reason = "no_improvement";
      break;
    }
    theta.theta = adam_step(adam, loop.adam, theta.theta, ev.grad);
  }
  return res;
}

}  // namespace ddopg
