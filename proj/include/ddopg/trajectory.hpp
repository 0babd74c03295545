#pragma once

#include "ddopg/numkit.hpp"

#include <string>
#include <vector>

namespace ddopg {

// One episode. Actions are the raw policy outputs, recorded before any
// actuator clipping the environment applies internally; likelihood ratios
// later in the pipeline rely on replaying exactly what the policy emitted.
struct Trajectory {
  RealMat states;   // T x state_dim, s_0 .. s_{T-1}
  RealMat actions;  // T x action_dim
  RealVec rewards;  // T
  double gamma = 1.0;
  double ret = 0.0;  // discounted return under gamma, fixed at collection

  int length() const { return static_cast<int>(rewards.size()); }
  double undiscounted_return() const { return rewards.sum(); }
  void validate() const;  // shape consistency, finite entries
};

double discounted_return(const RealVec& rewards, double gamma);
RealVec reward_to_go(const RealVec& rewards, double gamma);

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> load_trajectories(const std::string& path);

}  // namespace ddopg
