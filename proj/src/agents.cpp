#include "ddopg/agents.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>

namespace ddopg {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point t0, bool enabled) {
  if (!enabled) return 0.0;
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool rolling_mean_reached(const LearningCurve& curve, std::optional<double> target, int window) {
  if (!target.has_value()) return false;
  const int n = static_cast<int>(curve.rows.size());
  if (n < window) return false;
  double acc = 0.0;
  for (int i = n - window; i < n; ++i) acc += curve.rows[static_cast<size_t>(i)].ret;
  return acc / window >= *target;
}

// Per-row baseline features: state, state^2, normalized time and its powers,
// and a constant. The constant makes the fitted gradient invariant to a
// uniform shift of all targets.
RealMat baseline_features(const std::vector<Trajectory>& batch) {
  const int sdim = static_cast<int>(batch[0].states.cols());
  int rows = 0;
  for (const Trajectory& t : batch) rows += t.length();
  RealMat f(rows, 2 * sdim + 4);
  int r = 0;
  for (const Trajectory& t : batch) {
    const double len = static_cast<double>(t.length());
    for (int step = 0; step < t.length(); ++step, ++r) {
      f.block(r, 0, 1, sdim) = t.states.row(step);
      f.block(r, sdim, 1, sdim) = t.states.row(step).array().square().matrix();
      const double u = static_cast<double>(step) / len;
      f(r, 2 * sdim) = u;
      f(r, 2 * sdim + 1) = u * u;
      f(r, 2 * sdim + 2) = u * u * u;
      f(r, 2 * sdim + 3) = 1.0;
    }
  }
  return f;
}

}  // namespace

RealVec reinforce_grad(const std::vector<Trajectory>& batch, const PolicyParams& params,
                       const EvalNoise& noise, bool reward_to_go, bool linear_baseline) {
  detail::require(!batch.empty(), "reinforce_grad: empty batch");

  std::vector<const Trajectory*> ptrs;
  ptrs.reserve(batch.size());
  for (const Trajectory& t : batch) ptrs.push_back(&t);
  TrajBatch tb(ptrs);
  const auto ev = tb.eval(params, noise);

  RealVec targets(tb.total_rows());
  int r = 0;
  for (const Trajectory& t : batch) {
    if (reward_to_go) {
      targets.segment(r, t.length()) = ddopg::reward_to_go(t.rewards, t.gamma);
    } else {
      targets.segment(r, t.length()).setConstant(t.ret);
    }
    r += t.length();
  }

  RealVec advantage = targets;
  if (linear_baseline) {
    const RealMat f = baseline_features(batch);
    RealMat gram = f.transpose() * f;
    gram.diagonal().array() += 1e-5;
    const RealVec beta = gram.ldlt().solve(f.transpose() * targets);
    advantage -= f * beta;
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  return tb.weighted_grad(params, ev, (advantage.array() * inv_b).matrix());
}

RunResult ddopg_run(const Env& env, const DdopgConfig& cfg, std::uint64_t seed) {
  detail::require(cfg.support_size > 0, "ddopg: support_size must be positive");
  detail::require(cfg.warmup_iterations >= 0 && cfg.warmup_inner_steps >= 0,
                  "ddopg: negative warmup");
  const auto t0 = Clock::now();

  const EnvSpec& espec = env.spec();
  MlpSpec net{espec.state_dim, cfg.hidden, espec.action_dim};
  Rng init_rng(seed, 0);
  Rng env_rng(seed, 1);
  Rng select_rng(seed, 2);
  Rng jitter_rng(seed, 3);

  auto params = std::make_shared<const PolicyParams>(make_policy(net, init_rng));
  ReplayBuffer buffer(cfg.temperature, cfg.support_size);
  PairLogLikCache cache;

  SurrogateConfig scfg;
  scfg.noise = EvalNoise::isotropic(espec.action_dim, cfg.log_lengthscale);
  scfg.normalization = cfg.normalization;
  scfg.penalty_factor = cfg.penalty_factor;
  scfg.return_bound = env.max_return();

  // When the surrogate is flat at the current parameters (every selected
  // trajectory was produced by them), nudge off the stationary point so the
  // next rollout differs from the support.
  auto nudge = [&](PolicyParams p) {
    for (Eigen::Index i = 0; i < p.theta.size(); ++i)
      p.theta[i] += cfg.stationarity_jitter * jitter_rng.normal();
    return std::make_shared<const PolicyParams>(std::move(p));
  };

  // With one inner step per collection the run is a single continuous Adam
  // stream; the moment estimates must survive support refreshes.
  const bool one_step_stream = cfg.inner.max_steps == 1;
  AdamState stream_state = make_adam_state(params->theta.size());

  RunResult out;
  long steps = 0;
  for (long it = 0;; ++it) {
    Trajectory traj = collect(env, *params, env_rng, cfg.discount);
    steps += traj.length();
    out.curve.rows.push_back(
        CurveRow{it, steps, traj.undiscounted_return(), elapsed_seconds(t0, cfg.record_timing)});
    buffer.push(std::move(traj), params);

    if (rolling_mean_reached(out.curve, cfg.target_return, cfg.target_window)) break;
    if (steps >= cfg.max_env_steps) break;
    if (it + 1 >= cfg.max_iterations) break;

    const std::vector<int> picks = buffer.select(select_rng);
    const SupportSet support = build_support(buffer, picks, scfg.noise, &cache);

    if (one_step_stream) {
      const ObjectiveEval ev = eval_penalized_objective(support, *params, scfg, true);
      const bool flat = ev.no_support || ev.grad.size() == 0 ||
                        ev.grad.lpNorm<Eigen::Infinity>() <= cfg.inner.grad_tol;
      if (flat) {
        if (cfg.stationarity_jitter > 0.0) params = nudge(*params);
      } else {
        PolicyParams next = *params;
        next.theta = adam_step(stream_state, cfg.inner.adam, params->theta, ev.grad);
        params = std::make_shared<const PolicyParams>(std::move(next));
      }
      continue;
    }

    InnerLoopConfig loop = cfg.inner;
    if (it < cfg.warmup_iterations)
      loop.max_steps = std::min(loop.max_steps, cfg.warmup_inner_steps);

    InnerLoopResult res = optimize_lower_bound(*params, support, scfg, loop);
    if (res.steps_taken == 0 && res.stop_reason == "grad_tol" &&
        cfg.stationarity_jitter > 0.0) {
      params = nudge(std::move(res.params));
    } else {
      params = std::make_shared<const PolicyParams>(std::move(res.params));
    }
  }
  out.final_params = *params;
  return out;
}

RunResult reinforce_run(const Env& env, const ReinforceConfig& cfg, std::uint64_t seed) {
  detail::require(cfg.batch_env_steps > 0, "reinforce: batch_env_steps must be positive");
  detail::require(cfg.step_size > 0.0, "reinforce: step_size must be positive");
  const auto t0 = Clock::now();

  const EnvSpec& espec = env.spec();
  MlpSpec net{espec.state_dim, cfg.hidden, espec.action_dim};
  Rng init_rng(seed, 0);
  Rng env_rng(seed, 1);

  PolicyParams params = make_policy(net, init_rng);
  const EvalNoise noise = EvalNoise::isotropic(espec.action_dim, cfg.exploration_log_variance);
  const long episodes_per_batch =
      (cfg.batch_env_steps + espec.horizon - 1) / espec.horizon;

  RunResult out;
  long steps = 0;
  for (long update = 0;; ++update) {
    std::vector<Trajectory> batch;
    batch.reserve(static_cast<size_t>(episodes_per_batch));
    double ret_sum = 0.0;
    for (long b = 0; b < episodes_per_batch; ++b) {
      batch.push_back(collect_gaussian(env, params, noise, env_rng, cfg.discount));
      steps += batch.back().length();
      ret_sum += batch.back().undiscounted_return();
    }
    out.curve.rows.push_back(CurveRow{update, steps,
                                      ret_sum / static_cast<double>(episodes_per_batch),
                                      elapsed_seconds(t0, cfg.record_timing)});

    if (rolling_mean_reached(out.curve, cfg.target_return, cfg.target_window)) break;
    if (steps >= cfg.max_env_steps) break;
    if (update + 1 >= cfg.max_updates) break;

    const RealVec grad =
        reinforce_grad(batch, params, noise, cfg.reward_to_go, cfg.linear_baseline);
    params.theta += cfg.step_size * grad;
  }
  out.final_params = std::move(params);
  return out;
}

}  // namespace ddopg
