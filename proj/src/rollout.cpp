#include "ddopg/rollout.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ddopg {

void Trajectory::validate() const {
  detail::require(states.rows() == rewards.size() && actions.rows() == rewards.size(),
                  "trajectory: row count mismatch");
  detail::require(rewards.size() > 0, "trajectory: empty");
  detail::require(states.allFinite() && actions.allFinite() && rewards.allFinite(),
                  "trajectory: non-finite entries");
  detail::require(gamma >= 0.0 && gamma <= 1.0, "trajectory: gamma outside [0, 1]");
}

double discounted_return(const RealVec& rewards, double gamma) {
  double acc = 0.0;
  double g = 1.0;
  for (Eigen::Index t = 0; t < rewards.size(); ++t) {
    acc += g * rewards[t];
    g *= gamma;
  }
  return acc;
}

RealVec reward_to_go(const RealVec& rewards, double gamma) {
  RealVec out(rewards.size());
  double acc = 0.0;
  for (Eigen::Index t = rewards.size() - 1; t >= 0; --t) {
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

namespace {

Trajectory roll(const Env& env, const PolicyParams& params, const EvalNoise* noise, Rng& rng,
                double gamma) {
  const EnvSpec& spec = env.spec();
  detail::require(params.spec.input_dim == spec.state_dim &&
                      params.spec.output_dim == spec.action_dim,
                  "collect: policy dims do not match env");
  detail::require(gamma >= 0.0 && gamma <= 1.0, "collect: gamma outside [0, 1]");

  Trajectory traj;
  traj.gamma = gamma;
  traj.states.resize(spec.horizon, spec.state_dim);
  traj.actions.resize(spec.horizon, spec.action_dim);
  traj.rewards.resize(spec.horizon);

  EnvState state = env.reset(rng);
  int t = 0;
  while (!state.done) {
    RealVec a = act(params, state.x);
    if (noise != nullptr)
      for (Eigen::Index d = 0; d < a.size(); ++d)
        a[d] += std::exp(0.5 * noise->log_var[d]) * rng.normal();
    traj.states.row(t) = state.x.transpose();
    traj.actions.row(t) = a.transpose();
    StepResult res = env.step(state, a);
    traj.rewards[t] = res.reward;
    state = std::move(res.next);
    ++t;
    detail::require(t <= spec.horizon, "collect: env ran past its horizon");
  }
  traj.states.conservativeResize(t, Eigen::NoChange);
  traj.actions.conservativeResize(t, Eigen::NoChange);
  traj.rewards.conservativeResize(t);
  traj.ret = discounted_return(traj.rewards, gamma);
  traj.validate();
  detail::require(std::abs(traj.ret) <= env.max_return() * (1.0 + 1e-12),
                  "collect: return exceeds the env's stated bound");
  return traj;
}

}  // namespace

Trajectory collect(const Env& env, const PolicyParams& params, Rng& rng, double gamma) {
  return roll(env, params, nullptr, rng, gamma);
}

Trajectory collect_gaussian(const Env& env, const PolicyParams& params, const EvalNoise& noise,
                            Rng& rng, double gamma) {
  detail::require(noise.log_var.size() == env.spec().action_dim,
                  "collect: noise dim does not match env");
  return roll(env, params, &noise, rng, gamma);
}

namespace {

void write_real(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajs) {
  detail::require(!trajs.empty(), "save_trajectories: empty set");
  for (const Trajectory& t : trajs) t.validate();
  const Eigen::Index sdim = trajs[0].states.cols();
  const Eigen::Index adim = trajs[0].actions.cols();

  std::ofstream os(path);
  detail::require(os.good(), "save_trajectories: cannot open " + path);
  os << "ddopg-trajs v1\n";
  os << trajs.size() << " " << sdim << " " << adim << "\n";
  for (const Trajectory& t : trajs) {
    detail::require(t.states.cols() == sdim && t.actions.cols() == adim,
                    "save_trajectories: mixed dims");
    os << t.length() << " ";
    write_real(os, t.gamma);
    os << "\n";
    for (int r = 0; r < t.length(); ++r) {
      for (Eigen::Index c = 0; c < sdim; ++c) {
        write_real(os, t.states(r, c));
        os << " ";
      }
      for (Eigen::Index c = 0; c < adim; ++c) {
        write_real(os, t.actions(r, c));
        os << " ";
      }
      write_real(os, t.rewards[r]);
      os << "\n";
    }
  }
  detail::require(os.good(), "save_trajectories: write failed for " + path);
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
  std::ifstream is(path);
  detail::require(is.good(), "load_trajectories: cannot open " + path);
  std::string header;
  std::getline(is, header);
  detail::require(header == "ddopg-trajs v1", "load_trajectories: bad header in " + path);

  size_t count = 0;
  Eigen::Index sdim = 0, adim = 0;
  detail::require(static_cast<bool>(is >> count >> sdim >> adim),
                  "load_trajectories: truncated header");
  std::vector<Trajectory> out;
  out.reserve(count);
  for (size_t k = 0; k < count; ++k) {
    Trajectory t;
    int len = 0;
    detail::require(static_cast<bool>(is >> len >> t.gamma), "load_trajectories: truncated");
    t.states.resize(len, sdim);
    t.actions.resize(len, adim);
    t.rewards.resize(len);
    for (int r = 0; r < len; ++r) {
      for (Eigen::Index c = 0; c < sdim; ++c)
        detail::require(static_cast<bool>(is >> t.states(r, c)), "load_trajectories: truncated");
      for (Eigen::Index c = 0; c < adim; ++c)
        detail::require(static_cast<bool>(is >> t.actions(r, c)), "load_trajectories: truncated");
      detail::require(static_cast<bool>(is >> t.rewards[r]), "load_trajectories: truncated");
    }
    t.ret = discounted_return(t.rewards, t.gamma);
    t.validate();
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace ddopg
