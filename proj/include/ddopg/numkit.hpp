#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ddopg {

using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

namespace detail {
[[noreturn]] void fail(const std::string& msg);
inline void require(bool cond, const char* msg) {
  if (!cond) fail(msg);
}
inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}
}  // namespace detail

// Counter-based PRNG (splitmix64 core) with explicit stream splitting.
// The same (seed, stream) pair yields the same draw sequence on every
// platform; the standard <random> distributions are implementation-defined,
// which would break bit-reproducible runs, so uniform/normal are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // Child generator whose sequence is independent of the parent's position.
  Rng split(std::uint64_t substream) const;

  std::uint64_t next_u64();
  double uniform();                       // [0, 1), 53-bit resolution
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1) via Box-Muller
  int uniform_int(int n);                 // {0, ..., n-1}, unbiased

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
  std::uint64_t stream_;
};

// Fully connected network shape: input -> hidden (tanh) ... -> output (linear).
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;

  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_in(int l) const;
  int layer_out(int l) const;
  int param_count() const;
  bool operator==(const MlpSpec&) const = default;
};

// Flat parameter layout, fixed for persistence and gradient packing:
// for each layer, the weight matrix (fan_out x fan_in) in row-major order,
// then the bias vector. param_count() == sum over layers of (in+1)*out.

// Forward pass tape for a batch of inputs (one row per sample): the
// post-tanh activations of each hidden layer, plus the linear outputs.
struct MlpTape {
  std::vector<RealMat> hidden;  // hidden[l]: batch x hidden_dims[l]
  RealMat output;               // batch x output_dim
};

RealVec mlp_forward(const MlpSpec& spec, const RealVec& params, const RealVec& input);
RealMat mlp_forward_batch(const MlpSpec& spec, const RealVec& params, const RealMat& inputs);
MlpTape mlp_forward_batch_tape(const MlpSpec& spec, const RealVec& params, const RealMat& inputs);

// Parameter-space vector-Jacobian product: d/dtheta sum_rows cotangent . f(x).
// The tape must come from mlp_forward_batch_tape on the same (params, inputs).
RealVec mlp_vjp_batch(const MlpSpec& spec, const RealVec& params, const RealMat& inputs,
                      const MlpTape& tape, const RealMat& cotangents);
RealVec mlp_vjp(const MlpSpec& spec, const RealVec& params, const RealVec& input,
                const RealVec& cotangent);

// Glorot-uniform weights (row-major draw order), zero biases.
RealVec init_mlp_params(const MlpSpec& spec, Rng& rng);

// max-shifted, so only finiteness of the result can overflow, never the exps.
// Empty input and all -inf both return -inf.
double log_sum_exp(const RealVec& values);

// Central differences, one function evaluation pair per coordinate.
RealVec finite_diff_grad(const std::function<double(const RealVec&)>& f,
                         const RealVec& x, double h);

}  // namespace ddopg
