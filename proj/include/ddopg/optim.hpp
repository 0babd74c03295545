#pragma once

#include "ddopg/estimators.hpp"

#include <string>

namespace ddopg {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  RealVec m;
  RealVec v;
  long t = 0;
};

AdamState make_adam_state(Eigen::Index dim);

// One ascent step with bias-corrected moments; mutates state.
RealVec adam_step(AdamState& state, const AdamConfig& cfg, const RealVec& params,
                  const RealVec& grad);

struct InnerLoopConfig {
  AdamConfig adam;
  int max_steps = 200;
  double grad_tol = 1e-6;      // stop below this gradient infinity norm
  double improve_tol = 1e-8;   // stop when the best objective gained less...
  int improve_window = 10;     // ...than improve_tol over this many evals
};

struct InnerLoopResult {
  PolicyParams params;      // best iterate seen, the start point included
  double objective = 0.0;   // penalized objective of that iterate
  int steps_taken = 0;      // Adam updates actually performed
  std::string stop_reason;  // "max_steps" | "grad_tol" | "no_improvement"
};

// Maximizes the penalized surrogate over theta from the given start. Every
// iterate is scored and the best one returned, so the result can never be
// worse than the start under the same support. A -inf (no-support) start
// stays returnable only if literally every iterate is -inf.
InnerLoopResult optimize_lower_bound(const PolicyParams& start, const SupportSet& support,
                                     const SurrogateConfig& cfg, const InnerLoopConfig& loop);

}  // namespace ddopg
