#pragma once

#include <string>
#include <vector>

#include "hydra/image.hpp"

namespace hydra {

enum class TvVariant { isotropic, anisotropic };

TvVariant parse_tv_variant(const std::string& name);
std::string to_string(TvVariant v);

/// Forward differences with Neumann boundary (last difference is zero).
void image_gradient(const Image& x, std::vector<double>& gx, std::vector<double>& gy);
/// Discrete divergence, the negative adjoint of image_gradient.
Image divergence(int size, const std::vector<double>& px, const std::vector<double>& py);

double tv_value(const Image& x, TvVariant variant = TvVariant::isotropic);

/// An element of the subdifferential of TV at x (zero where the gradient vanishes).
Image tv_subgradient(const Image& x, TvVariant variant = TvVariant::isotropic);

/// Dual variable of the projection algorithm; reuse across calls to warm start.
struct TvDualState {
  std::vector<double> px;
  std::vector<double> py;
};

/// argmin_x 1/2 ||x - v||^2 + weight * TV(x) by Chambolle's dual projection.
/// weight == 0 returns v unchanged.
Image tv_prox(const Image& v, double weight, int inner_iters,
              TvVariant variant = TvVariant::isotropic, TvDualState* warm = nullptr);

}  // namespace hydra
