#include "hydra/radon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "hydra/errors.hpp"
#include "hydra/vec.hpp"

namespace hydra {

std::vector<double> equispaced_angles(int count) {
  std::vector<double> angles(count);
  for (int k = 0; k < count; ++k) angles[k] = std::numbers::pi * k / count;
  return angles;
}

std::vector<int> uniform_view_mask(int n_full, int n_views) {
  if (n_views < 1 || n_views > n_full)
    throw ConfigError("view count must lie in [1, " + std::to_string(n_full) + "]");
  std::vector<int> mask(n_views);
  for (int k = 0; k < n_views; ++k)
    mask[k] = static_cast<int>(static_cast<long long>(k) * n_full / n_views);
  return mask;
}

RadonOperator::RadonOperator(Geometry geometry) : geometry_(std::move(geometry)) {
  const auto& g = geometry_;
  if (g.image_size < 1 || g.n_detectors < 1)
    throw ConfigError("image size and detector count must be positive");
  if (!(g.detector_spacing > 0.0) || !(g.pixel_size > 0.0))
    throw ConfigError("detector spacing and pixel size must be positive");
  if (g.angles.empty()) throw ConfigError("geometry has no angles");
  for (std::size_t i = 0; i < g.angles.size(); ++i) {
    if (g.angles[i] < 0.0 || g.angles[i] >= std::numbers::pi)
      throw ConfigError("angles must lie in [0, pi)");
    if (i > 0 && g.angles[i] <= g.angles[i - 1])
      throw ConfigError("angles must be strictly increasing");
  }
  if (geometry_.mask.empty()) {
    geometry_.mask.resize(g.angles.size());
    for (std::size_t i = 0; i < g.angles.size(); ++i) geometry_.mask[i] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < geometry_.mask.size(); ++i) {
    const int m = geometry_.mask[i];
    if (m < 0 || m >= static_cast<int>(g.angles.size()))
      throw ConfigError("mask index out of range");
    if (i > 0 && m <= geometry_.mask[i - 1]) throw ConfigError("mask must be strictly increasing");
  }
  cos_.resize(geometry_.mask.size());
  sin_.resize(geometry_.mask.size());
  for (std::size_t i = 0; i < geometry_.mask.size(); ++i) {
    const double theta = g.angles[geometry_.mask[i]];
    cos_[i] = std::cos(theta);
    sin_[i] = std::sin(theta);
  }
}

RadonOperator RadonOperator::parallel_beam(int image_size, int n_full_angles, int n_views,
                                           double pixel_size) {
  Geometry g;
  g.image_size = image_size;
  g.n_detectors = image_size;
  g.detector_spacing = 1.0;
  g.pixel_size = pixel_size;
  g.angles = equispaced_angles(n_full_angles);
  g.mask = uniform_view_mask(n_full_angles, n_views);
  return RadonOperator(std::move(g));
}

std::size_t RadonOperator::image_numel() const {
  return static_cast<std::size_t>(geometry_.image_size) * geometry_.image_size;
}

std::size_t RadonOperator::sinogram_numel() const {
  return static_cast<std::size_t>(n_angles()) * geometry_.n_detectors;
}

RadonOperator RadonOperator::with_mask(std::vector<int> mask) const {
  Geometry g = geometry_;
  g.mask = std::move(mask);
  return RadonOperator(std::move(g));
}

Sinogram RadonOperator::apply_mask(const Sinogram& sino, const std::vector<int>& sub_mask) const {
  if (sino.n_angles != n_angles() || sino.n_detectors != n_detectors())
    throw DimensionError("sinogram does not match operator geometry");
  Sinogram out(static_cast<int>(sub_mask.size()), n_detectors());
  for (std::size_t i = 0; i < sub_mask.size(); ++i) {
    const auto it = std::find(geometry_.mask.begin(), geometry_.mask.end(), sub_mask[i]);
    if (it == geometry_.mask.end()) throw DimensionError("sub-mask angle not present in sinogram");
    const int row = static_cast<int>(it - geometry_.mask.begin());
    std::copy_n(sino.data.begin() + static_cast<std::ptrdiff_t>(row) * n_detectors(), n_detectors(),
                out.data.begin() + static_cast<std::ptrdiff_t>(i) * n_detectors());
  }
  return out;
}

double RadonOperator::require_norm_sq() const {
  if (!norm_sq_) throw ConfigError("operator norm has not been estimated");
  return *norm_sq_;
}

template <class Visit>
void RadonOperator::trace_ray(int a, int bin, Visit&& visit) const {
  const int n = geometry_.image_size;
  const double half = 0.5 * (n - 1);
  const double t = (bin - 0.5 * (geometry_.n_detectors - 1)) * geometry_.detector_spacing;
  const double c = cos_[a];
  const double s = sin_[a];
  // Ray: {p : p.x cos + p.y sin = t}, direction (-sin, cos).
  if (std::abs(c) >= std::abs(s)) {
    const double w = geometry_.pixel_size / std::abs(c);
    for (int row = 0; row < n; ++row) {
      const double y = half - row;
      const double u = (t - y * s) / c + half;
      const double fl = std::floor(u);
      const int j0 = static_cast<int>(fl);
      if (j0 < -1 || j0 >= n) continue;
      const double f = u - fl;
      const std::size_t base = static_cast<std::size_t>(row) * n;
      if (j0 >= 0) visit(base + j0, w * (1.0 - f));
      if (j0 + 1 < n) visit(base + j0 + 1, w * f);
    }
  } else {
    const double w = geometry_.pixel_size / std::abs(s);
    for (int col = 0; col < n; ++col) {
      const double x = col - half;
      const double r = half - (t - x * c) / s;
      const double fl = std::floor(r);
      const int i0 = static_cast<int>(fl);
      if (i0 < -1 || i0 >= n) continue;
      const double f = r - fl;
      if (i0 >= 0) visit(static_cast<std::size_t>(i0) * n + col, w * (1.0 - f));
      if (i0 + 1 < n) visit(static_cast<std::size_t>(i0 + 1) * n + col, w * f);
    }
  }
}

template <class T>
void RadonOperator::forward(std::span<const T> image, std::span<T> sino) const {
  if (image.size() != image_numel() || sino.size() != sinogram_numel())
    throw DimensionError("radon_forward: operand sizes do not match geometry");
  const int nd = geometry_.n_detectors;
  for (int a = 0; a < n_angles(); ++a) {
    for (int k = 0; k < nd; ++k) {
      double acc = 0.0;
      trace_ray(a, k, [&](std::size_t p, double w) { acc += w * static_cast<double>(image[p]); });
      sino[static_cast<std::size_t>(a) * nd + k] = static_cast<T>(acc);
    }
  }
}

template <class T>
void RadonOperator::adjoint(std::span<const T> sino, std::span<T> image) const {
  if (image.size() != image_numel() || sino.size() != sinogram_numel())
    throw DimensionError("radon_adjoint: operand sizes do not match geometry");
  const int nd = geometry_.n_detectors;
  std::vector<double> acc(image.size(), 0.0);
  for (int a = 0; a < n_angles(); ++a) {
    for (int k = 0; k < nd; ++k) {
      const double v = static_cast<double>(sino[static_cast<std::size_t>(a) * nd + k]);
      if (v == 0.0) continue;
      trace_ray(a, k, [&](std::size_t p, double w) { acc[p] += w * v; });
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) image[i] = static_cast<T>(acc[i]);
}

template void RadonOperator::forward<float>(std::span<const float>, std::span<float>) const;
template void RadonOperator::forward<double>(std::span<const double>, std::span<double>) const;
template void RadonOperator::adjoint<float>(std::span<const float>, std::span<float>) const;
template void RadonOperator::adjoint<double>(std::span<const double>, std::span<double>) const;

Sinogram radon_forward(const RadonOperator& op, const Image& x) {
  if (x.size != op.image_size()) throw DimensionError("radon_forward: image size mismatch");
  Sinogram s(op.n_angles(), op.n_detectors());
  op.forward<double>(x.span(), s.span());
  return s;
}

Image radon_adjoint(const RadonOperator& op, const Sinogram& s) {
  if (s.n_angles != op.n_angles() || s.n_detectors != op.n_detectors())
    throw DimensionError("radon_adjoint: sinogram geometry mismatch");
  Image x(op.image_size());
  op.adjoint<double>(s.span(), x.span());
  return x;
}

LinearMap as_linear_map(const RadonOperator& op) {
  LinearMap m;
  m.n_in = op.image_numel();
  m.n_out = op.sinogram_numel();
  m.apply = [&op](std::span<const double> in, std::span<double> out) { op.forward(in, out); };
  m.apply_adjoint = [&op](std::span<const double> in, std::span<double> out) {
    op.adjoint(in, out);
  };
  return m;
}

double estimate_operator_norm(const LinearMap& map, int iters, std::uint64_t seed) {
  if (iters < 1) throw ConfigError("power iteration needs at least one step");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> x(map.n_in), ax(map.n_out);
  for (auto& v : x) v = normal(rng);
  double nx = vec::norm(x);
  if (nx == 0.0) return 0.0;
  vec::scale(1.0 / nx, x);
  double estimate = 0.0;
  for (int it = 0; it < iters; ++it) {
    map.apply(x, ax);
    estimate = vec::dot(ax, ax);  // Rayleigh quotient of A^T A at unit x
    map.apply_adjoint(ax, x);
    nx = vec::norm(x);
    if (nx == 0.0) return 0.0;
    vec::scale(1.0 / nx, x);
  }
  map.apply(x, ax);
  return std::max(estimate, vec::dot(ax, ax));
}

double estimate_operator_norm(RadonOperator& op, int iters, std::uint64_t seed) {
  const double v = estimate_operator_norm(as_linear_map(op), iters, seed);
  op.set_norm_sq(v);
  return v;
}

}  // namespace hydra
