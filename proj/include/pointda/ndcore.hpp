#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pointda/common.hpp"
#include "pointda/rng.hpp"

namespace pointda::nd {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// The one nonlinearity used everywhere: x * sigmoid(x). Smooth, and zero at
// zero, which makes an all-zero network with skip connections an identity.
inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

constexpr const char* kActivationTag = "silu";

struct Layer {
  Mat w;  // out x in
  Vec b;  // out
};

// Plain fully connected stack. After every second layer the input of that
// two-layer block is added back, zero-padded when narrower than the block
// output and omitted when wider. The final layer has no activation. An
// incomplete trailing block (odd depth) gets no skip.
struct MlpParams {
  std::vector<Layer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  int in_dim() const { return static_cast<int>(layers.front().w.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().w.rows()); }
  std::int64_t param_count() const;

  // Checks dimension chaining and finiteness; throws SchemaError.
  void validate() const;

  static MlpParams zeros(const std::vector<int>& dims);
  // Uniform Xavier init; final_layer_zero makes the net output exactly 0.
  static MlpParams xavier(const std::vector<int>& dims, Rng& rng,
                          bool final_layer_zero = false);
};

// Same shapes as the parameters they differentiate.
struct MlpGrads {
  std::vector<Layer> layers;

  static MlpGrads zeros_like(const MlpParams& p);
  void accumulate(const MlpGrads& other);
  void scale(double s);
};

// Per-layer activations kept for the backward pass.
struct MlpTape {
  std::vector<Mat> h;  // h[l] = input of layer l; h[depth] = output
  std::vector<Mat> z;  // pre-activation of layer l
};

// inputs: n x in_dim, one sample per row. Returns n x out_dim.
Mat mlp_forward(const MlpParams& params, const Mat& inputs,
                MlpTape* tape = nullptr);

// Reverse-mode gradients for a recorded forward pass. upstream is dL/doutput
// (n x out_dim). Parameter gradients are accumulated into grads; the return
// value is dL/dinputs.
Mat mlp_backward(const MlpParams& params, const MlpTape& tape,
                 const Mat& upstream, MlpGrads& grads);

// Convenience wrapper matching the spec-level operation: runs a forward pass
// internally and returns (parameter grads, input grads).
std::pair<MlpGrads, Mat> mlp_gradients(const MlpParams& params,
                                       const Mat& inputs, const Mat& upstream);

struct AdamState {
  std::vector<Layer> m;
  std::vector<Layer> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros_like(const MlpParams& p);
};

// In-place Adam update with bias correction. Throws NumericError on
// non-finite gradients, leaving params and state untouched.
void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads,
               double lr);

struct LrSchedule {
  double base_lr = 1e-3;
  std::vector<int> milestones;  // strictly increasing
  double gamma = 0.5;

  void validate() const;
};

double lr_at(const LrSchedule& schedule, int epoch);

// Mean squared error over rows where ocean_mask is true, all columns.
// Throws DomainError when no row is masked in.
double masked_mse(const Mat& pred, const Mat& target,
                  const std::vector<std::uint8_t>& ocean_mask);

// Loss plus dL/dpred (zero on masked-out rows).
double masked_mse_with_grad(const Mat& pred, const Mat& target,
                            const std::vector<std::uint8_t>& ocean_mask,
                            Mat& grad_pred);

// ---------------------------------------------------------------------------
// Checkpoint container: magic, version, config hash, string attributes,
// named f32 tensors, trailing whole-file checksum. Values are stored as
// 32-bit little-endian floats regardless of the in-memory precision.

struct Container {
  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> attrs;
  std::map<std::string, std::pair<std::vector<std::int64_t>,
                                  std::vector<float>>> tensors;

  void put_tensor(const std::string& name, const Mat& m);
  void put_vector(const std::string& name, const Vec& v);
  void put_values(const std::string& name, const std::vector<double>& v);
  Mat get_tensor(const std::string& name) const;
  Vec get_vector(const std::string& name) const;
  std::vector<double> get_values(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
};

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

}  // namespace pointda::nd
