#include "ddopg/policy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ddopg {

namespace {

void check_policy(const PolicyParams& params) {
  detail::require(params.theta.size() == params.spec.param_count(),
                  "policy: theta size != spec.param_count()");
}

void check_noise(const EvalNoise& noise, int action_dim) {
  detail::require(static_cast<int>(noise.log_var.size()) == action_dim,
                  "policy: log_var dim != action dim");
  detail::require(noise.log_var.allFinite(), "policy: log_var must be finite");
}

}  // namespace

EvalNoise EvalNoise::isotropic(int action_dim, double log_variance) {
  detail::require(action_dim > 0, "EvalNoise: action_dim must be positive");
  EvalNoise n;
  n.log_var = RealVec::Constant(action_dim, log_variance);
  return n;
}

PolicyParams make_policy(const MlpSpec& spec, Rng& rng) {
  PolicyParams p;
  p.spec = spec;
  p.theta = init_mlp_params(spec, rng);
  return p;
}

RealVec act(const PolicyParams& params, const RealVec& state) {
  check_policy(params);
  return mlp_forward(params.spec, params.theta, state);
}

TrajBatch::TrajBatch(const std::vector<const Trajectory*>& trajs) {
  detail::require(!trajs.empty(), "TrajBatch: empty trajectory set");
  int rows = 0;
  row_begin_.push_back(0);
  for (const Trajectory* t : trajs) {
    detail::require(t != nullptr, "TrajBatch: null trajectory");
    detail::require(t->length() > 0, "TrajBatch: empty trajectory");
    rows += t->length();
    row_begin_.push_back(rows);
  }
  const int sdim = static_cast<int>(trajs[0]->states.cols());
  const int adim = static_cast<int>(trajs[0]->actions.cols());
  states_.resize(rows, sdim);
  actions_.resize(rows, adim);
  for (size_t i = 0; i < trajs.size(); ++i) {
    detail::require(trajs[i]->states.cols() == sdim && trajs[i]->actions.cols() == adim,
                    "TrajBatch: mixed state/action dims");
    states_.middleRows(row_begin_[i], trajs[i]->length()) = trajs[i]->states;
    actions_.middleRows(row_begin_[i], trajs[i]->length()) = trajs[i]->actions;
  }
}

TrajBatch::Eval TrajBatch::eval(const PolicyParams& params, const EvalNoise& noise) const {
  check_policy(params);
  detail::require(params.spec.input_dim == state_dim() && params.spec.output_dim == action_dim(),
                  "TrajBatch: policy dims do not match trajectories");
  check_noise(noise, action_dim());

  Eval out;
  out.tape = mlp_forward_batch_tape(params.spec, params.theta, states_);

  const RealVec inv_var = (-noise.log_var.array()).exp().matrix();
  // Constant part of the per-step log density: -0.5 * (A log 2pi + sum log_var).
  const double log_norm =
      -0.5 * (action_dim() * std::log(2.0 * std::numbers::pi) + noise.log_var.sum());

  RealMat resid = actions_ - out.tape.output;        // rows x A
  out.scaled_resid = (resid.array().rowwise() * inv_var.transpose().array()).matrix();
  const RealVec row_quad = (resid.array() * out.scaled_resid.array()).rowwise().sum().matrix();

  out.log_liks.resize(num_trajs());
  for (int i = 0; i < num_trajs(); ++i) {
    double acc = 0.0;
    for (int r = row_begin_[static_cast<size_t>(i)]; r < row_begin_[static_cast<size_t>(i) + 1]; ++r)
      acc += log_norm - 0.5 * row_quad[r];
    out.log_liks[i] = acc;
  }
  return out;
}

RealVec TrajBatch::weighted_grad(const PolicyParams& params, const Eval& eval,
                                 const RealVec& row_coeffs) const {
  detail::require(row_coeffs.size() == total_rows(), "weighted_grad: one coeff per row expected");
  // d(log density)/d(mu) = (a - mu)/var; scale rows and push through the net.
  RealMat cots = (eval.scaled_resid.array().colwise() * row_coeffs.array()).matrix();
  return mlp_vjp_batch(params.spec, params.theta, states_, eval.tape, cots);
}

RealVec TrajBatch::weighted_grad_per_traj(const PolicyParams& params, const Eval& eval,
                                          const RealVec& traj_coeffs) const {
  return weighted_grad(params, eval, expand_to_rows(traj_coeffs));
}

RealVec TrajBatch::expand_to_rows(const RealVec& traj_values) const {
  detail::require(traj_values.size() == num_trajs(), "expand_to_rows: one value per trajectory");
  RealVec out(total_rows());
  for (int i = 0; i < num_trajs(); ++i)
    out.segment(row_begin_[static_cast<size_t>(i)],
                row_begin_[static_cast<size_t>(i) + 1] - row_begin_[static_cast<size_t>(i)])
        .setConstant(traj_values[i]);
  return out;
}

double action_log_density(const PolicyParams& params, const EvalNoise& noise,
                          const RealVec& state, const RealVec& action) {
  check_policy(params);
  check_noise(noise, params.spec.output_dim);
  const RealVec mu = act(params, state);
  const RealVec resid = action - mu;
  double acc = 0.0;
  for (Eigen::Index d = 0; d < resid.size(); ++d)
    acc += -0.5 * (std::log(2.0 * std::numbers::pi) + noise.log_var[d] +
                   resid[d] * resid[d] * std::exp(-noise.log_var[d]));
  return acc;
}

double traj_log_lik(const PolicyParams& params, const EvalNoise& noise, const Trajectory& traj) {
  TrajBatch batch({&traj});
  return batch.eval(params, noise).log_liks[0];
}

RealVec traj_log_lik_grad(const PolicyParams& params, const EvalNoise& noise,
                          const Trajectory& traj) {
  TrajBatch batch({&traj});
  const auto ev = batch.eval(params, noise);
  return batch.weighted_grad(params, ev, RealVec::Ones(batch.total_rows()));
}

namespace {

void write_real(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

void save_policy(const std::string& path, const PolicyParams& params) {
  check_policy(params);
  std::ofstream os(path);
  detail::require(os.good(), "save_policy: cannot open " + path);
  os << "ddopg-policy v1\n";
  os << "input " << params.spec.input_dim << "\n";
  os << "hidden";
  for (int h : params.spec.hidden_dims) os << " " << h;
  os << "\n";
  os << "output " << params.spec.output_dim << "\n";
  os << "params " << params.theta.size() << "\n";
  for (Eigen::Index i = 0; i < params.theta.size(); ++i) {
    write_real(os, params.theta[i]);
    os << "\n";
  }
  detail::require(os.good(), "save_policy: write failed for " + path);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream is(path);
  detail::require(is.good(), "load_policy: cannot open " + path);
  std::string line;
  std::getline(is, line);
  detail::require(line == "ddopg-policy v1", "load_policy: bad header in " + path);

  PolicyParams p;
  std::string tag;
  is >> tag >> p.spec.input_dim;
  detail::require(tag == "input", "load_policy: expected 'input'");
  std::getline(is, line);  // rest of input line
  std::getline(is, line);
  {
    std::istringstream hs(line);
    hs >> tag;
    detail::require(tag == "hidden", "load_policy: expected 'hidden'");
    int h;
    while (hs >> h) p.spec.hidden_dims.push_back(h);
  }
  is >> tag >> p.spec.output_dim;
  detail::require(tag == "output", "load_policy: expected 'output'");
  Eigen::Index n = 0;
  is >> tag >> n;
  detail::require(tag == "params", "load_policy: expected 'params'");
  detail::require(n == p.spec.param_count(), "load_policy: param count mismatch");
  p.theta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    detail::require(static_cast<bool>(is >> p.theta[i]), "load_policy: truncated params");
  }
  return p;
}

}  // namespace ddopg
