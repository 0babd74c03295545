#include "ddopg/replay.hpp"

#include <algorithm>
#include <cmath>

namespace ddopg {

ReplayBuffer::ReplayBuffer(double temperature, int max_selected)
    : temperature_(temperature), max_selected_(max_selected) {
  detail::require(temperature > 0.0, "replay: temperature must be positive");
  detail::require(max_selected > 0, "replay: max_selected must be positive");
}

void ReplayBuffer::push(Trajectory traj, std::shared_ptr<const PolicyParams> behavior) {
  push(std::make_shared<const Trajectory>(std::move(traj)), std::move(behavior));
}

void ReplayBuffer::push(std::shared_ptr<const Trajectory> traj,
                        std::shared_ptr<const PolicyParams> behavior) {
  detail::require(traj != nullptr && behavior != nullptr, "replay: null push");
  traj->validate();
  ReplayEntry e;
  e.ret = traj->ret;
  e.traj = std::move(traj);
  e.behavior = std::move(behavior);
  entries_.push_back(std::move(e));
}

const ReplayEntry& ReplayBuffer::entry(int i) const {
  detail::require(i >= 0 && i < size(), "replay: entry index out of range");
  return entries_[static_cast<size_t>(i)];
}

RealVec ReplayBuffer::selection_probs() const {
  detail::require(size() > 0, "replay: selection on an empty buffer");
  const int n = size();
  double lo = entries_[0].ret, hi = entries_[0].ret;
  for (const auto& e : entries_) {
    lo = std::min(lo, e.ret);
    hi = std::max(hi, e.ret);
  }
  RealVec logits(n);
  for (int i = 0; i < n; ++i) {
    const double norm = hi > lo ? (entries_[static_cast<size_t>(i)].ret - lo) / (hi - lo) : 0.5;
    logits[i] = norm / temperature_;
  }
  const double m = logits.maxCoeff();
  RealVec p = (logits.array() - m).exp().matrix();
  p /= p.sum();
  return p;
}

std::vector<int> ReplayBuffer::select_iid(Rng& rng, int n) const {
  detail::require(n >= 0, "replay: negative draw count");
  const RealVec p = selection_probs();
  std::vector<int> out;
  out.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    // Inverse CDF walk; u < 1 guarantees termination at the last index.
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = size() - 1;
    for (int i = 0; i < size(); ++i) {
      acc += p[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.push_back(pick);
  }
  return out;
}

std::vector<int> ReplayBuffer::select(Rng& rng) const {
  const int n = std::min(max_selected_, size());
  std::vector<int> out = select_iid(rng, n);
  const int newest = size() - 1;
  if (std::find(out.begin(), out.end(), newest) == out.end()) out[0] = newest;
  return out;
}

}  // namespace ddopg
