#include "ddopg/numkit.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ddopg {

namespace detail {

void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace detail

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer; full-period bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(seed + kGolden) ^ mix64(~stream)), seed_(seed), stream_(stream) {}

Rng Rng::split(std::uint64_t substream) const {
  return Rng(seed_, stream_ ^ mix64(substream + 0x632BE59BD9B4E019ULL));
}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double Rng::uniform() {
  // Top 53 bits over 2^53: exact dyadic rationals in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  detail::require(lo <= hi, "uniform: lo > hi");
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  // Box-Muller, cosine branch only; two uniforms per draw keeps the
  // consumption pattern fixed (no cached spare).
  const double u1 = 1.0 - uniform();  // (0, 1]: log stays finite
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int n) {
  detail::require(n > 0, "uniform_int: n must be positive");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t reject_below = (-bound) % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= reject_below) return static_cast<int>(x % bound);
  }
}

int MlpSpec::layer_in(int l) const {
  detail::require(l >= 0 && l < num_layers(), "layer_in: bad layer index");
  return l == 0 ? input_dim : hidden_dims[static_cast<size_t>(l) - 1];
}

int MlpSpec::layer_out(int l) const {
  detail::require(l >= 0 && l < num_layers(), "layer_out: bad layer index");
  return l == num_layers() - 1 ? output_dim : hidden_dims[static_cast<size_t>(l)];
}

int MlpSpec::param_count() const {
  int total = 0;
  for (int l = 0; l < num_layers(); ++l) total += (layer_in(l) + 1) * layer_out(l);
  return total;
}

namespace {

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WeightView = Eigen::Map<const RowMajorMat>;
using WeightGradView = Eigen::Map<RowMajorMat>;
using BiasView = Eigen::Map<const RealVec>;
using BiasGradView = Eigen::Map<RealVec>;

struct LayerOffsets {
  int weight = 0;
  int bias = 0;
};

LayerOffsets layer_offsets(const MlpSpec& spec, int l) {
  LayerOffsets off;
  for (int k = 0; k < l; ++k) off.weight += (spec.layer_in(k) + 1) * spec.layer_out(k);
  off.bias = off.weight + spec.layer_in(l) * spec.layer_out(l);
  return off;
}

void check_spec(const MlpSpec& spec, const RealVec& params) {
  detail::require(spec.input_dim > 0 && spec.output_dim > 0, "mlp: dims must be positive");
  for (int h : spec.hidden_dims) detail::require(h > 0, "mlp: hidden dims must be positive");
  detail::require(params.size() == spec.param_count(), "mlp: params size != param_count");
}

}  // namespace

MlpTape mlp_forward_batch_tape(const MlpSpec& spec, const RealVec& params, const RealMat& inputs) {
  check_spec(spec, params);
  detail::require(inputs.cols() == spec.input_dim, "mlp: input cols != input_dim");
  MlpTape tape;
  tape.hidden.reserve(spec.hidden_dims.size());
  const RealMat* act = &inputs;
  const int L = spec.num_layers();
  for (int l = 0; l < L; ++l) {
    const auto off = layer_offsets(spec, l);
    WeightView w(params.data() + off.weight, spec.layer_out(l), spec.layer_in(l));
    BiasView b(params.data() + off.bias, spec.layer_out(l));
    RealMat z = (*act) * w.transpose();
    z.rowwise() += b.transpose();
    if (l < L - 1) {
      tape.hidden.emplace_back(z.array().tanh().matrix());
      act = &tape.hidden.back();
    } else {
      tape.output = std::move(z);
    }
  }
  return tape;
}

RealMat mlp_forward_batch(const MlpSpec& spec, const RealVec& params, const RealMat& inputs) {
  return mlp_forward_batch_tape(spec, params, inputs).output;
}

RealVec mlp_forward(const MlpSpec& spec, const RealVec& params, const RealVec& input) {
  return mlp_forward_batch(spec, params, input.transpose()).row(0).transpose();
}

RealVec mlp_vjp_batch(const MlpSpec& spec, const RealVec& params, const RealMat& inputs,
                      const MlpTape& tape, const RealMat& cotangents) {
  check_spec(spec, params);
  detail::require(cotangents.rows() == inputs.rows() && cotangents.cols() == spec.output_dim,
                  "mlp_vjp: cotangent shape mismatch");
  detail::require(static_cast<int>(tape.hidden.size()) == spec.num_layers() - 1,
                  "mlp_vjp: tape does not match spec");
  RealVec grad = RealVec::Zero(spec.param_count());
  RealMat delta = cotangents;
  for (int l = spec.num_layers() - 1; l >= 0; --l) {
    const auto off = layer_offsets(spec, l);
    const RealMat& prev = (l == 0) ? inputs : tape.hidden[static_cast<size_t>(l) - 1];
    WeightGradView gw(grad.data() + off.weight, spec.layer_out(l), spec.layer_in(l));
    BiasGradView gb(grad.data() + off.bias, spec.layer_out(l));
    gw.noalias() = delta.transpose() * prev;
    gb = delta.colwise().sum().transpose();
    if (l > 0) {
      WeightView w(params.data() + off.weight, spec.layer_out(l), spec.layer_in(l));
      RealMat next(delta.rows(), spec.layer_in(l));
      next.noalias() = delta * w;
      // d tanh(z)/dz = 1 - tanh(z)^2, with tanh(z) on the tape.
      next.array() *= 1.0 - prev.array().square();
      delta = std::move(next);
    }
  }
  return grad;
}

RealVec mlp_vjp(const MlpSpec& spec, const RealVec& params, const RealVec& input,
                const RealVec& cotangent) {
  const RealMat x = input.transpose();
  const MlpTape tape = mlp_forward_batch_tape(spec, params, x);
  return mlp_vjp_batch(spec, params, x, tape, cotangent.transpose());
}

RealVec init_mlp_params(const MlpSpec& spec, Rng& rng) {
  detail::require(spec.input_dim > 0 && spec.output_dim > 0, "mlp: dims must be positive");
  RealVec params = RealVec::Zero(spec.param_count());
  for (int l = 0; l < spec.num_layers(); ++l) {
    const auto off = layer_offsets(spec, l);
    const int fan_in = spec.layer_in(l);
    const int fan_out = spec.layer_out(l);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    // Row-major draw order matches the storage layout; biases stay zero.
    for (int i = 0; i < fan_out * fan_in; ++i)
      params[off.weight + i] = rng.uniform(-bound, bound);
  }
  return params;
}

double log_sum_exp(const RealVec& values) {
  if (values.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = values.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf, or a NaN/inf poisoning the max
  double acc = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) acc += std::exp(values[i] - m);
  return m + std::log(acc);
}

RealVec finite_diff_grad(const std::function<double(const RealVec&)>& f,
                         const RealVec& x, double h) {
  detail::require(h > 0.0, "finite_diff_grad: h must be positive");
  RealVec grad(x.size());
  RealVec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    probe[i] = xi + h;
    const double fp = f(probe);
    probe[i] = xi - h;
    const double fm = f(probe);
    probe[i] = xi;
    detail::require(std::isfinite(fp) && std::isfinite(fm),
                    "finite_diff_grad: non-finite function value");
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace ddopg
