#pragma once

// Naive reference implementations used as test oracles. Everything here is
// written with plain loops and the direct textbook formula, independent of
// the library's vectorized/stabilized code paths. Keep these dumb.

#include "ddopg/numkit.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using ddopg::MlpSpec;
using ddopg::RealMat;
using ddopg::RealVec;

// Unit-by-unit forward pass: z_j = b_j + sum_i w_ji a_i, tanh on hidden.
inline RealVec mlp_forward(const MlpSpec& spec, const RealVec& params, const RealVec& input) {
  std::vector<double> act(input.data(), input.data() + input.size());
  int off = 0;
  const int L = spec.num_layers();
  for (int l = 0; l < L; ++l) {
    const int nin = spec.layer_in(l);
    const int nout = spec.layer_out(l);
    const int wbase = off;
    const int bbase = off + nin * nout;
    std::vector<double> next(static_cast<size_t>(nout));
    for (int j = 0; j < nout; ++j) {
      double z = params[bbase + j];
      for (int i = 0; i < nin; ++i) z += params[wbase + j * nin + i] * act[static_cast<size_t>(i)];
      next[static_cast<size_t>(j)] = (l < L - 1) ? std::tanh(z) : z;
    }
    act = std::move(next);
    off = bbase + nout;
  }
  RealVec out(act.size());
  for (size_t i = 0; i < act.size(); ++i) out[static_cast<Eigen::Index>(i)] = act[i];
  return out;
}

// log N(a | mu, diag(exp(log_var))), summed over dimensions.
inline double diag_gaussian_log_density(const RealVec& a, const RealVec& mu,
                                        const RealVec& log_var) {
  double acc = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    const double var = std::exp(log_var[d]);
    const double r = a[d] - mu[d];
    acc += -0.5 * (std::log(2.0 * M_PI) + log_var[d] + r * r / var);
  }
  return acc;
}

inline double discounted_return(const RealVec& rewards, double gamma) {
  double acc = 0.0;
  double g = 1.0;
  for (Eigen::Index t = 0; t < rewards.size(); ++t) {
    acc += g * rewards[t];
    g *= gamma;
  }
  return acc;
}

inline RealVec reward_to_go(const RealVec& rewards, double gamma) {
  RealVec out(rewards.size());
  for (Eigen::Index t = 0; t < rewards.size(); ++t) {
    double acc = 0.0;
    double g = 1.0;
    for (Eigen::Index k = t; k < rewards.size(); ++k) {
      acc += g * rewards[k];
      g *= gamma;
    }
    out[t] = acc;
  }
  return out;
}

// Direct-ratio importance weights for a mixture proposal: no log-space
// stabilization at all. Only usable where the densities do not under/overflow.
// lik[i][j] = product over steps of N(a_t^i | mu_j(s_t^i), Sigma); counts[j]
// is the multiplicity of behavior j in the support multiset.
inline std::vector<double> naive_mixture_weights(const std::vector<double>& target_lik,
                                                 const std::vector<std::vector<double>>& lik,
                                                 const std::vector<double>& counts) {
  const size_t n = target_lik.size();
  double total_count = 0.0;
  for (double c : counts) total_count += c;
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) {
    double mix = 0.0;
    for (size_t j = 0; j < lik[i].size(); ++j) mix += counts[j] * lik[i][j];
    w[i] = target_lik[i] / (mix / total_count);
  }
  return w;
}

// ESS = (sum w)^2 / sum w^2 on plain weights.
inline double ess_from_weights(const std::vector<double>& w) {
  double s = 0.0, s2 = 0.0;
  for (double x : w) {
    s += x;
    s2 += x * x;
  }
  if (s2 == 0.0) return 0.0;
  return s * s / s2;
}

// Softmax over min-max normalized scores with temperature lambda.
inline std::vector<double> softmax_priorities(const std::vector<double>& returns, double lambda) {
  double lo = returns[0], hi = returns[0];
  for (double r : returns) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  std::vector<double> p(returns.size());
  double z = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double norm = (hi > lo) ? (returns[i] - lo) / (hi - lo) : 0.5;
    p[i] = std::exp(norm / lambda);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

}  // namespace oracle
