#pragma once

#include "ddopg/envs.hpp"
#include "ddopg/policy.hpp"
#include "ddopg/trajectory.hpp"

namespace ddopg {

// One episode under the deterministic policy a_t = mu_theta(s_t). The raw
// network output is recorded; under the evaluation noise model these actions
// sit exactly at the Gaussian mean, which keeps own-policy importance
// weights at exactly one.
Trajectory collect(const Env& env, const PolicyParams& params, Rng& rng, double gamma);

// One episode with exploration noise a_t = mu_theta(s_t) + sqrt(var) * xi,
// xi ~ N(0, I). Used by the likelihood-ratio baseline, not the main method.
Trajectory collect_gaussian(const Env& env, const PolicyParams& params, const EvalNoise& noise,
                            Rng& rng, double gamma);

}  // namespace ddopg
