#pragma once

#include "ddopg/numkit.hpp"

#include <memory>
#include <string>

namespace ddopg {

struct EnvSpec {
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 0;        // hard episode cap, enforced by step()
  RealVec action_low;     // actuator saturation, applied inside step()
  RealVec action_high;
};

struct EnvState {
  RealVec x;
  int t = 0;
  bool done = false;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
};

// Environments are immutable; all episode state lives in EnvState, so one
// env instance can serve any number of concurrent rollouts.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::string name() const = 0;
  virtual EnvState reset(Rng& rng) const = 0;
  virtual StepResult step(const EnvState& state, const RealVec& action) const = 0;
  // Upper bound on |discounted return| for any gamma in [0, 1]; the penalty
  // term and a collection-time sanity check both use it.
  virtual double max_return() const = 0;
};

// Pole balancing on a cart, continuous force in [-10, 10], +1 per step,
// failure when |angle| > 12 deg or |position| > 2.4, horizon 100.
class CartpoleEnv final : public Env {
 public:
  CartpoleEnv();
  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "cartpole"; }
  EnvState reset(Rng& rng) const override;
  StepResult step(const EnvState& state, const RealVec& action) const override;
  double max_return() const override { return 100.0; }

 private:
  EnvSpec spec_;
};

// Underpowered car in a valley, force in [-1, 1], -0.1*a^2 per step and
// +100 at the goal position 0.45, horizon 500.
class MountaincarEnv final : public Env {
 public:
  MountaincarEnv();
  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "mountaincar"; }
  EnvState reset(Rng& rng) const override;
  StepResult step(const EnvState& state, const RealVec& action) const override;
  double max_return() const override { return 100.0; }

 private:
  EnvSpec spec_;
};

// 1-D double integrator regulating to the origin from (1, 0), quadratic
// state/action cost, deterministic reset. Short horizons make every
// quantity in the pipeline computable by hand, which the tests lean on.
class PointMassEnv final : public Env {
 public:
  explicit PointMassEnv(int horizon = 10);
  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "pointmass"; }
  EnvState reset(Rng& rng) const override;
  StepResult step(const EnvState& state, const RealVec& action) const override;
  double max_return() const override { return bound_; }

 private:
  EnvSpec spec_;
  double bound_ = 0.0;
};

// "cartpole" | "mountaincar" | "pointmass"
std::unique_ptr<Env> make_env(const std::string& name);

}  // namespace ddopg
