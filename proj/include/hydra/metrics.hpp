#pragma once

#include "hydra/image.hpp"

namespace hydra {

inline constexpr double kPsnrCapDb = 99.0;

/// 10 log10(range^2 / MSE), capped at kPsnrCapDb when MSE == 0.
double psnr(const Image& x, const Image& ref, double range = 1.0);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

/// Mean local SSIM over all valid (fully inside) Gaussian window positions.
double ssim(const Image& x, const Image& ref, const SsimConfig& cfg = {});

}  // namespace hydra
