#include "ddopg/envs.hpp"

#include <cmath>

namespace ddopg {

namespace {

double clip(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

void check_action(const EnvSpec& spec, const EnvState& state, const RealVec& action) {
  detail::require(!state.done, "env: step() on a finished episode");
  detail::require(static_cast<int>(state.x.size()) == spec.state_dim, "env: bad state dim");
  detail::require(static_cast<int>(action.size()) == spec.action_dim, "env: bad action dim");
  detail::require(action.allFinite(), "env: non-finite action");
}

}  // namespace

// ---------------------------------------------------------------- cartpole

namespace {
constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kTotalMass = kCartMass + kPoleMass;
constexpr double kPoleHalfLength = 0.5;
constexpr double kPoleMassLength = kPoleMass * kPoleHalfLength;
constexpr double kCartpoleDt = 0.02;
constexpr double kForceLimit = 10.0;
constexpr double kAngleLimit = 12.0 * M_PI / 180.0;
constexpr double kPositionLimit = 2.4;
}  // namespace

CartpoleEnv::CartpoleEnv() {
  spec_.state_dim = 4;  // x, x_dot, theta, theta_dot
  spec_.action_dim = 1;
  spec_.horizon = 100;
  spec_.action_low = RealVec::Constant(1, -kForceLimit);
  spec_.action_high = RealVec::Constant(1, kForceLimit);
}

EnvState CartpoleEnv::reset(Rng& rng) const {
  EnvState s;
  s.x.resize(4);
  for (int i = 0; i < 4; ++i) s.x[i] = rng.uniform(-0.05, 0.05);
  return s;
}

StepResult CartpoleEnv::step(const EnvState& state, const RealVec& action) const {
  check_action(spec_, state, action);
  const double force = clip(action[0], -kForceLimit, kForceLimit);
  const double x = state.x[0], x_dot = state.x[1], theta = state.x[2], theta_dot = state.x[3];

  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kPoleHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  StepResult out;
  out.next.x.resize(4);
  out.next.x[0] = x + kCartpoleDt * x_dot;
  out.next.x[1] = x_dot + kCartpoleDt * x_acc;
  out.next.x[2] = theta + kCartpoleDt * theta_dot;
  out.next.x[3] = theta_dot + kCartpoleDt * theta_acc;
  out.next.t = state.t + 1;

  const bool failed = std::abs(out.next.x[0]) > kPositionLimit ||
                      std::abs(out.next.x[2]) > kAngleLimit;
  out.next.done = failed || out.next.t >= spec_.horizon;
  out.reward = 1.0;  // every executed step counts, the failing one included
  return out;
}

// ------------------------------------------------------------- mountaincar

namespace {
constexpr double kMcMinPos = -1.2;
constexpr double kMcMaxPos = 0.6;
constexpr double kMcMaxSpeed = 0.07;
constexpr double kMcGoalPos = 0.45;
constexpr double kMcPower = 0.0015;
constexpr double kMcGoalReward = 100.0;
}  // namespace

MountaincarEnv::MountaincarEnv() {
  spec_.state_dim = 2;  // position, velocity
  spec_.action_dim = 1;
  spec_.horizon = 500;
  spec_.action_low = RealVec::Constant(1, -1.0);
  spec_.action_high = RealVec::Constant(1, 1.0);
}

EnvState MountaincarEnv::reset(Rng& rng) const {
  EnvState s;
  s.x.resize(2);
  s.x[0] = rng.uniform(-0.6, -0.4);
  s.x[1] = 0.0;
  return s;
}

StepResult MountaincarEnv::step(const EnvState& state, const RealVec& action) const {
  check_action(spec_, state, action);
  const double force = clip(action[0], -1.0, 1.0);
  double pos = state.x[0];
  double vel = state.x[1];

  vel += force * kMcPower - 0.0025 * std::cos(3.0 * pos);
  vel = clip(vel, -kMcMaxSpeed, kMcMaxSpeed);
  pos += vel;
  pos = clip(pos, kMcMinPos, kMcMaxPos);
  if (pos <= kMcMinPos && vel < 0.0) vel = 0.0;  // inelastic left wall

  StepResult out;
  out.next.x.resize(2);
  out.next.x[0] = pos;
  out.next.x[1] = vel;
  out.next.t = state.t + 1;

  const bool reached = pos >= kMcGoalPos;
  out.next.done = reached || out.next.t >= spec_.horizon;
  out.reward = -0.1 * force * force + (reached ? kMcGoalReward : 0.0);
  return out;
}

// --------------------------------------------------------------- pointmass

namespace {
constexpr double kPmDt = 0.1;
constexpr double kPmActionLimit = 2.0;
constexpr double kPmActionCost = 0.01;
}  // namespace

PointMassEnv::PointMassEnv(int horizon) {
  detail::require(horizon > 0, "pointmass: horizon must be positive");
  spec_.state_dim = 2;  // position, velocity
  spec_.action_dim = 1;
  spec_.horizon = horizon;
  spec_.action_low = RealVec::Constant(1, -kPmActionLimit);
  spec_.action_high = RealVec::Constant(1, kPmActionLimit);

  // From (1, 0): |v_t| <= dt*a_max*t, |s_t| <= 1 + dt * sum_k |v_k|, so the
  // per-step cost is bounded and the return bound follows for any gamma.
  const double h = static_cast<double>(horizon);
  const double s_bound = 1.0 + kPmDt * kPmDt * kPmActionLimit * (h * (h - 1.0) / 2.0);
  bound_ = h * (s_bound * s_bound + kPmActionCost * kPmActionLimit * kPmActionLimit);
}

EnvState PointMassEnv::reset(Rng& /*rng*/) const {
  EnvState s;
  s.x.resize(2);
  s.x[0] = 1.0;
  s.x[1] = 0.0;
  return s;
}

StepResult PointMassEnv::step(const EnvState& state, const RealVec& action) const {
  check_action(spec_, state, action);
  const double a = clip(action[0], -kPmActionLimit, kPmActionLimit);
  const double pos = state.x[0];
  const double vel = state.x[1];

  StepResult out;
  out.next.x.resize(2);
  out.next.x[0] = pos + kPmDt * vel;
  out.next.x[1] = vel + kPmDt * a;
  out.next.t = state.t + 1;
  out.next.done = out.next.t >= spec_.horizon;
  // Cost on the pre-transition state and the actuated action.
  out.reward = -(pos * pos + kPmActionCost * a * a);
  return out;
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "cartpole") return std::make_unique<CartpoleEnv>();
  if (name == "mountaincar") return std::make_unique<MountaincarEnv>();
  if (name == "pointmass") return std::make_unique<PointMassEnv>();
  detail::fail("make_env: unknown environment '" + name + "'");
}

}  // namespace ddopg
