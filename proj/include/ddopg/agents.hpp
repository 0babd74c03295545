#pragma once

#include "ddopg/envs.hpp"
#include "ddopg/optim.hpp"
#include "ddopg/replay.hpp"
#include "ddopg/rollout.hpp"

#include <optional>
#include <vector>

namespace ddopg {

// One curve row per data-collection event: the episode index, cumulative
// env steps after it, its undiscounted return (batch mean for the batch
// learner), and elapsed wall-clock seconds (0 unless timing is recorded;
// reruns must produce byte-identical artifacts by default).
struct CurveRow {
  long iteration = 0;
  long steps = 0;
  double ret = 0.0;
  double seconds = 0.0;
};

struct LearningCurve {
  std::vector<CurveRow> rows;
};

struct RunResult {
  PolicyParams final_params;
  LearningCurve curve;
};

struct DdopgConfig {
  std::vector<int> hidden{32, 32};
  double discount = 0.99;
  double temperature = 0.1;       // replay prioritization
  int support_size = 50;          // max trajectories per surrogate
  double log_lengthscale = 3.0;   // log variance of the evaluation noise
  double penalty_factor = 0.05;
  WeightNormalization normalization = WeightNormalization::SelfNormalized;
  // Full surrogate optimization between collections. max_steps=1 selects the
  // single-gradient-step variant: the run becomes one continuous Adam stream
  // whose moment estimates persist across collections, matching how the batch
  // learner applies one update per batch. Warmup caps do not apply to it.
  InnerLoopConfig inner;
  int warmup_iterations = 5;      // early iterations get a reduced...
  int warmup_inner_steps = 10;    // ...inner budget while support is thin
  // Deterministic rollouts make the surrogate exactly stationary whenever
  // every selected trajectory was collected by the current parameters (the
  // log-density gradient vanishes term by term). When the inner loop reports
  // a zero gradient before taking a single step, the parameters are nudged
  // by this much so the next episode differs and the support regains
  // behavioral diversity. Zero disables the escape.
  double stationarity_jitter = 0.05;
  long max_env_steps = 100000;
  long max_iterations = 1000000;
  std::optional<double> target_return;  // rolling-mean early stop
  int target_window = 5;
  bool record_timing = false;
};

struct ReinforceConfig {
  std::vector<int> hidden{32, 32};
  double discount = 0.99;
  double step_size = 0.03;
  long batch_env_steps = 5000;            // env steps per update
  double exploration_log_variance = 0.0;  // behavior noise while collecting
  bool reward_to_go = true;
  bool linear_baseline = true;
  long max_env_steps = 100000;
  long max_updates = 1000000;
  std::optional<double> target_return;
  int target_window = 5;
  bool record_timing = false;
};

// Batched likelihood-ratio gradient: mean over trajectories of
// sum_t grad log N(a_t | mu_theta(s_t), Sigma) * (G_t - b(s_t, t)), with
// G_t either the full return or the reward-to-go, and b an optional linear
// least-squares baseline refit on this batch.
RealVec reinforce_grad(const std::vector<Trajectory>& batch, const PolicyParams& params,
                       const EvalNoise& noise, bool reward_to_go, bool linear_baseline);

RunResult ddopg_run(const Env& env, const DdopgConfig& cfg, std::uint64_t seed);
RunResult reinforce_run(const Env& env, const ReinforceConfig& cfg, std::uint64_t seed);

}  // namespace ddopg
