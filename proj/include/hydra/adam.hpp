#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hydra/denoiser.hpp"

namespace hydra {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  bool operator==(const AdamState&) const = default;
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, const AdamConfig& cfg, std::span<double> params,
               std::span<const double> grad);

/// Adam update of the network parameters followed by spectral renormalization.
void optimizer_step(DenoiserNet& net, AdamState& state, const AdamConfig& cfg,
                    std::span<const double> grad);

}  // namespace hydra
