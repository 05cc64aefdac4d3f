#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hydra/image.hpp"

namespace hydra {

/// 3x3 "same" convolution on a C x H x W stack (zero padding), weights laid
/// out [out][in][ky][kx]. Exposed for the network and for tests.
void conv3x3_forward(std::span<const double> in, int in_ch, int height, int width,
                     std::span<const double> weight, std::span<const double> bias, int out_ch,
                     std::span<double> out);
/// Transpose of the bias-free convolution (gradient with respect to the input).
void conv3x3_transpose(std::span<const double> dout, int out_ch, int height, int width,
                       std::span<const double> weight, int in_ch, std::span<double> din);

struct DenoiserOptions {
  std::vector<int> widths = {1, 32, 32, 32, 1};  ///< channel widths, first and last must be 1
  double lipschitz_budget = 0.9;
  double leaky_slope = 0.2;
  int spectral_size = 64;  ///< spatial size of the power-iteration vectors
  /// Residual weight beta: D(v) = beta * v + U(v). The convolutional stack U
  /// gets the remaining budget, lipschitz_budget - beta.
  double skip = 0.5;

  void validate() const;
  bool operator==(const DenoiserOptions&) const = default;
};

/// Convolutional denoiser D: conv3x3 layers with leaky rectifiers in between,
/// no activation after the last layer, and an optional scaled skip path. All parameters live in
/// one flat vector (per layer: weight block then bias block).
class DenoiserNet {
 public:
  struct Layer {
    int in_ch = 0;
    int out_ch = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    std::size_t weight_count() const { return static_cast<std::size_t>(out_ch) * in_ch * 9; }
  };

  /// All parameters zero, power vectors unset.
  explicit DenoiserNet(DenoiserOptions options);

  /// Fan-in scaled uniform weights, zero biases, warmed-up power vectors and
  /// one normalization pass.
  static DenoiserNet initialized(DenoiserOptions options, std::uint64_t seed,
                                 int warmup_power_iters = 30);

  const DenoiserOptions& options() const { return options_; }
  int n_layers() const { return static_cast<int>(layers_.size()); }
  const Layer& layer(int l) const { return layers_[l]; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> weight(int l);
  std::span<const double> weight(int l) const;
  std::span<double> bias(int l);
  std::span<const double> bias(int l) const;

  std::vector<double>& power_vector(int l) { return power_u_[l]; }
  const std::vector<double>& power_vector(int l) const { return power_u_[l]; }
  double sigma(int l) const { return sigma_[l]; }
  void set_sigma(int l, double v) { sigma_[l] = v; }
  /// Product of the cached per-layer spectral-norm estimates.
  double lipschitz_estimate() const;

  /// Per-layer cap budget^(1/n_layers).
  double layer_budget() const;

 private:
  DenoiserOptions options_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
  std::vector<std::vector<double>> power_u_;
  std::vector<double> sigma_;
};

/// Activations kept by the forward pass for the reverse pass.
struct DenoiserTape {
  int size = 0;
  std::vector<std::vector<double>> inputs;  ///< input of every layer
  std::vector<std::vector<double>> pre;     ///< pre-activation output of every layer
};

Image denoiser_forward(const DenoiserNet& net, const Image& v, DenoiserTape* tape = nullptr);

struct DenoiserGrad {
  std::vector<double> params;  ///< same layout as DenoiserNet::params()
  Image input;
};

/// Reverse-mode product cotangent^T dD/d(theta, v), recomputing the forward pass.
DenoiserGrad denoiser_vjp(const DenoiserNet& net, const Image& v, const Image& cotangent);
DenoiserGrad denoiser_vjp(const DenoiserNet& net, const DenoiserTape& tape, const Image& cotangent);

/// One power-iteration step per layer on its linear map, then every layer
/// whose estimate exceeds budget^(1/n_layers) is scaled down to it. Layers
/// already under the cap are left untouched.
void normalize_spectral(DenoiserNet& net, int power_steps = 1);

/// Advances the power vector of layer `l` by `steps` and returns the estimate
/// of its spectral norm (no rescaling).
double power_iterate_layer(DenoiserNet& net, int l, int steps);

}  // namespace hydra
