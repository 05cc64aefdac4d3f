#include "hydra/metrics.hpp"

#include <cmath>
#include <vector>

#include "hydra/errors.hpp"

namespace hydra {

double psnr(const Image& x, const Image& ref, double range) {
  if (x.size != ref.size) throw DimensionError("psnr: image sizes differ");
  if (!(range > 0.0)) throw DomainError("psnr: range must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double d = x.data[i] - ref.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(x.numel());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(range * range / mse));
}

namespace {

// Separable "valid" filtering with a normalized 1-D kernel.
std::vector<double> filter_valid(const std::vector<double>& img, int n, const std::vector<double>& k) {
  const int w = static_cast<int>(k.size());
  const int m = n - w + 1;
  std::vector<double> rows(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int t = 0; t < w; ++t) s += k[t] * img[static_cast<std::size_t>(i) * n + j + t];
      rows[static_cast<std::size_t>(i) * m + j] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int t = 0; t < w; ++t) s += k[t] * rows[static_cast<std::size_t>(i + t) * m + j];
      out[static_cast<std::size_t>(i) * m + j] = s;
    }
  return out;
}

}  // namespace

double ssim(const Image& x, const Image& ref, const SsimConfig& cfg) {
  if (x.size != ref.size) throw DimensionError("ssim: image sizes differ");
  if (x.size < cfg.window) throw DimensionError("ssim: image smaller than window");
  std::vector<double> kernel(cfg.window);
  double ksum = 0.0;
  const double c = 0.5 * (cfg.window - 1);
  for (int t = 0; t < cfg.window; ++t) {
    kernel[t] = std::exp(-0.5 * (t - c) * (t - c) / (cfg.sigma * cfg.sigma));
    ksum += kernel[t];
  }
  for (auto& v : kernel) v /= ksum;

  const int n = x.size;
  std::vector<double> xx(x.numel()), yy(x.numel()), xy(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    xx[i] = x.data[i] * x.data[i];
    yy[i] = ref.data[i] * ref.data[i];
    xy[i] = x.data[i] * ref.data[i];
  }
  const auto mx = filter_valid(x.data, n, kernel);
  const auto my = filter_valid(ref.data, n, kernel);
  const auto sxx = filter_valid(xx, n, kernel);
  const auto syy = filter_valid(yy, n, kernel);
  const auto sxy = filter_valid(xy, n, kernel);
  const double c1 = (cfg.k1 * cfg.range) * (cfg.k1 * cfg.range);
  const double c2 = (cfg.k2 * cfg.range) * (cfg.k2 * cfg.range);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace hydra
