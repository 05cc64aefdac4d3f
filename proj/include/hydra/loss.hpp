#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hydra/denoiser.hpp"
#include "hydra/fixed_point.hpp"
#include "hydra/layer.hpp"
#include "hydra/radon.hpp"
#include "hydra/tv.hpp"

namespace hydra {

/// hydra: data consistency + gamma * denoising term.
/// plain: data consistency only.
/// tv:    data consistency + tv_alpha * TV of the reconstruction.
enum class LossMode { hydra, plain, tv };

LossMode parse_loss_mode(const std::string& name);
std::string to_string(LossMode m);

struct LossConfig {
  LossMode mode = LossMode::hydra;
  std::optional<double> gamma;  ///< unset: ||A||^2
  double noise_sigma = 0.15;    ///< std of the denoising noise, fraction of the unit range
  double tv_alpha = 1e-2;
  TvVariant tv_variant = TvVariant::isotropic;

  void validate() const;
  double effective_gamma(double norm_sq) const { return gamma.value_or(norm_sq); }
  bool operator==(const LossConfig&) const = default;
};

struct LossComponents {
  double dc = 0.0;   ///< ||A x1 - y||^2
  double reg = 0.0;  ///< unweighted regularization term (0 in plain mode)
};

struct LossAndGrad {
  LossComponents loss;
  std::vector<double> grad;  ///< d(dc + weight * reg)/d(theta)
  Image x_star;
  SolveReport solve;
};

/// Loss and gradient with the equilibrium x* held constant (Jacobian-free
/// backpropagation): the data term is differentiated through exactly one
/// layer application at x*, the denoising term through D only at x* + noise.
LossAndGrad surrogate_loss_and_grad(const DenoiserNet& net, const RadonOperator& op,
                                    const LayerConfig& layer, const LossConfig& loss,
                                    const Image& x_star, const Sinogram& y, const Image& noise);

/// Solves for x* without gradients, draws the denoising noise from
/// `noise_seed`, then evaluates the surrogate.
LossAndGrad hybrid_loss_and_grad(const DenoiserNet& net, const RadonOperator& op,
                                 const LayerConfig& layer, const EquilibriumConfig& eq,
                                 const LossConfig& loss, const Sinogram& y,
                                 std::uint64_t noise_seed);

/// Per-pixel N(0, sigma^2) draws.
Image gaussian_noise(int size, double sigma, std::uint64_t seed);

}  // namespace hydra
