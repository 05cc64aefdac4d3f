#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hydra/image.hpp"

namespace hydra {

/// Parallel-beam geometry description. Serialized into dataset manifests and
/// checkpoint indices.
struct Geometry {
  int image_size = 64;
  int n_detectors = 64;
  double detector_spacing = 1.0;  ///< pixels per detector bin
  double pixel_size = 1.0;        ///< physical length of one pixel edge
  std::vector<double> angles;     ///< full angle set, radians, increasing in [0, pi)
  std::vector<int> mask;          ///< retained angle indices (increasing)

  bool operator==(const Geometry&) const = default;
};

/// `count` equispaced angles k*pi/count.
std::vector<double> equispaced_angles(int count);

/// Indices of `n_views` angles spread uniformly over a full set of `n_full`.
std::vector<int> uniform_view_mask(int n_full, int n_views);

/// Masked discrete Radon transform A = M A_full.
///
/// The forward projector is ray driven (Joseph): every ray is marched one pixel
/// row (or column) at a time along its dominant axis and the image is sampled
/// by linear interpolation across the other axis. The adjoint visits exactly
/// the same (pixel, weight) stencil and scatters, so it is the algebraic
/// transpose of the forward map. Immutable apart from the cached norm.
class RadonOperator {
 public:
  explicit RadonOperator(Geometry geometry);

  /// Full-angle operator with n_full equispaced angles, keeping n_views of them.
  static RadonOperator parallel_beam(int image_size, int n_full_angles, int n_views,
                                     double pixel_size = 1.0);

  const Geometry& geometry() const { return geometry_; }
  int image_size() const { return geometry_.image_size; }
  int n_detectors() const { return geometry_.n_detectors; }
  int n_angles() const { return static_cast<int>(geometry_.mask.size()); }
  double angle(int active_index) const { return geometry_.angles[geometry_.mask[active_index]]; }
  std::size_t image_numel() const;
  std::size_t sinogram_numel() const;

  /// Same full geometry with a different mask.
  RadonOperator with_mask(std::vector<int> mask) const;
  /// Restrict a sinogram of this operator's geometry to a sub-mask.
  Sinogram apply_mask(const Sinogram& sino, const std::vector<int>& sub_mask) const;

  std::optional<double> norm_sq() const { return norm_sq_; }
  void set_norm_sq(double v) { norm_sq_ = v; }
  /// Throws ConfigError when the norm has not been estimated.
  double require_norm_sq() const;

  // Raw kernels: arithmetic is carried out in double for every T.
  template <class T>
  void forward(std::span<const T> image, std::span<T> sino) const;
  template <class T>
  void adjoint(std::span<const T> sino, std::span<T> image) const;

 private:
  template <class Visit>
  void trace_ray(int active_index, int bin, Visit&& visit) const;

  Geometry geometry_;
  std::vector<double> cos_;
  std::vector<double> sin_;
  std::optional<double> norm_sq_;
};

Sinogram radon_forward(const RadonOperator& op, const Image& x);
Image radon_adjoint(const RadonOperator& op, const Sinogram& s);

/// Generic real linear map used by the power iteration.
struct LinearMap {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;
  std::function<void(std::span<const double>, std::span<double>)> apply_adjoint;
};

LinearMap as_linear_map(const RadonOperator& op);

/// Power iteration on A^T A from a seeded Gaussian start; returns ||A||^2.
double estimate_operator_norm(const LinearMap& map, int iters, std::uint64_t seed);

/// As above; also caches the result in `op`.
double estimate_operator_norm(RadonOperator& op, int iters, std::uint64_t seed);

}  // namespace hydra
