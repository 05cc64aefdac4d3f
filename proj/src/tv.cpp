#include "hydra/tv.hpp"

#include <algorithm>
#include <cmath>

#include "hydra/errors.hpp"

namespace hydra {

TvVariant parse_tv_variant(const std::string& name) {
  if (name == "isotropic") return TvVariant::isotropic;
  if (name == "anisotropic") return TvVariant::anisotropic;
  throw ConfigError("unknown TV variant '" + name + "'");
}

std::string to_string(TvVariant v) {
  return v == TvVariant::isotropic ? "isotropic" : "anisotropic";
}

void image_gradient(const Image& x, std::vector<double>& gx, std::vector<double>& gy) {
  const int n = x.size;
  gx.assign(x.numel(), 0.0);
  gy.assign(x.numel(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * n + j;
      if (j + 1 < n) gx[k] = x.data[k + 1] - x.data[k];
      if (i + 1 < n) gy[k] = x.data[k + n] - x.data[k];
    }
  }
}

Image divergence(int n, const std::vector<double>& px, const std::vector<double>& py) {
  Image d(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * n + j;
      double v = 0.0;
      if (j + 1 < n) v += px[k];
      if (j > 0) v -= px[k - 1];
      if (i + 1 < n) v += py[k];
      if (i > 0) v -= py[k - n];
      d.data[k] = v;
    }
  }
  return d;
}

double tv_value(const Image& x, TvVariant variant) {
  std::vector<double> gx, gy;
  image_gradient(x, gx, gy);
  double s = 0.0;
  for (std::size_t k = 0; k < gx.size(); ++k) {
    s += variant == TvVariant::isotropic ? std::hypot(gx[k], gy[k])
                                         : std::abs(gx[k]) + std::abs(gy[k]);
  }
  return s;
}

Image tv_subgradient(const Image& x, TvVariant variant) {
  std::vector<double> gx, gy;
  image_gradient(x, gx, gy);
  for (std::size_t k = 0; k < gx.size(); ++k) {
    if (variant == TvVariant::isotropic) {
      const double m = std::hypot(gx[k], gy[k]);
      if (m > 0.0) {
        gx[k] /= m;
        gy[k] /= m;
      }
    } else {
      gx[k] = (gx[k] > 0.0) - (gx[k] < 0.0);
      gy[k] = (gy[k] > 0.0) - (gy[k] < 0.0);
    }
  }
  Image g = divergence(x.size, gx, gy);
  for (auto& v : g.data) v = -v;
  return g;
}

Image tv_prox(const Image& v, double weight, int inner_iters, TvVariant variant,
              TvDualState* warm) {
  if (weight < 0.0) throw DomainError("tv_prox weight must be nonnegative");
  if (weight == 0.0) return v;
  const std::size_t n = v.numel();
  TvDualState local;
  TvDualState& p = warm ? *warm : local;
  if (p.px.size() != n) {
    p.px.assign(n, 0.0);
    p.py.assign(n, 0.0);
  }
  constexpr double tau = 0.249;  // projected dual ascent converges for tau < 1/4
  Image scaled = v;
  for (auto& s : scaled.data) s /= weight;
  std::vector<double> gx, gy;
  for (int it = 0; it < inner_iters; ++it) {
    Image r = divergence(v.size, p.px, p.py);
    for (std::size_t k = 0; k < n; ++k) r.data[k] -= scaled.data[k];
    image_gradient(r, gx, gy);
    for (std::size_t k = 0; k < n; ++k) {
      const double qx = p.px[k] + tau * gx[k];
      const double qy = p.py[k] + tau * gy[k];
      if (variant == TvVariant::isotropic) {
        const double m = std::max(1.0, std::hypot(qx, qy));
        p.px[k] = qx / m;
        p.py[k] = qy / m;
      } else {
        p.px[k] = std::clamp(qx, -1.0, 1.0);
        p.py[k] = std::clamp(qy, -1.0, 1.0);
      }
    }
  }
  Image x = divergence(v.size, p.px, p.py);
  for (std::size_t k = 0; k < n; ++k) x.data[k] = v.data[k] - weight * x.data[k];
  return x;
}

}  // namespace hydra
