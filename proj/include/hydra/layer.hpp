#pragma once

#include <string>

#include "hydra/denoiser.hpp"
#include "hydra/image.hpp"
#include "hydra/radon.hpp"

namespace hydra {

enum class Omega { clamp, identity };

Omega parse_omega(const std::string& name);
std::string to_string(Omega o);

/// Equilibrium layer settings. The gradient step is s = step_scale / ||A||^2.
struct LayerConfig {
  double lambda = 0.4;      ///< mixing weight, open interval (0, 1)
  Omega omega = Omega::clamp;
  double step_scale = 0.9;  ///< open interval (0, 1)

  void validate() const;
  bool operator==(const LayerConfig&) const = default;
};

/// Elementwise clamp to [0, 1].
Image omega_project(const Image& x);
Image apply_omega(Omega o, const Image& x);

/// x - 2 s A^T (A x - y)
Image gradient_map(const RadonOperator& op, const Image& x, const Sinogram& y, double s);

/// lambda * D(v) + (1 - lambda) * v, before Omega.
Image mix_denoiser(const DenoiserNet& net, double lambda, const Image& v);

/// One application of the equilibrium map: Omega(lambda D(G(x, y)) + (1 - lambda) G(x, y)).
Image layer_apply(const DenoiserNet& net, const RadonOperator& op, const LayerConfig& cfg,
                  const Image& x, const Sinogram& y);

}  // namespace hydra
