#pragma once

#include "ddopg/policy.hpp"
#include "ddopg/trajectory.hpp"

#include <memory>
#include <vector>

namespace ddopg {

struct ReplayEntry {
  std::shared_ptr<const Trajectory> traj;
  std::shared_ptr<const PolicyParams> behavior;  // snapshot that produced traj
  double ret = 0.0;                              // prioritization score
};

// Grow-only store of (trajectory, behavior snapshot) pairs with softmax
// prioritization over min-max normalized returns. Selection is iid with
// replacement; duplicate indices in one support draw are expected and
// carry multiplicity downstream.
class ReplayBuffer {
 public:
  ReplayBuffer(double temperature, int max_selected);

  int size() const { return static_cast<int>(entries_.size()); }
  double temperature() const { return temperature_; }
  int max_selected() const { return max_selected_; }

  void push(Trajectory traj, std::shared_ptr<const PolicyParams> behavior);
  void push(std::shared_ptr<const Trajectory> traj, std::shared_ptr<const PolicyParams> behavior);
  const ReplayEntry& entry(int i) const;

  // p(i) proportional to exp(norm(R_i) / temperature) where norm min-max
  // rescales returns to [0, 1]; a fully degenerate return spread maps every
  // trajectory to 0.5, i.e. the uniform distribution. Computed in log space,
  // so extreme temperatures cannot overflow.
  RealVec selection_probs() const;

  // n iid draws (with replacement) from selection_probs().
  std::vector<int> select_iid(Rng& rng, int n) const;

  // min(max_selected, size) draws; the newest entry always appears at least
  // once (it replaces the first draw when missing), so the current policy's
  // own trajectory is guaranteed support.
  std::vector<int> select(Rng& rng) const;

 private:
  std::vector<ReplayEntry> entries_;
  double temperature_;
  int max_selected_;
};

}  // namespace ddopg
