#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hydra {

/// Square pixel grid, row-major, row 0 at the top.
struct Image {
  int size = 0;
  std::vector<double> data;

  Image() = default;
  explicit Image(int n, double fill = 0.0)
      : size(n), data(static_cast<std::size_t>(n) * n, fill) {}

  double& operator()(int row, int col) { return data[static_cast<std::size_t>(row) * size + col]; }
  double operator()(int row, int col) const {
    return data[static_cast<std::size_t>(row) * size + col];
  }
  std::size_t numel() const { return data.size(); }
  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  bool operator==(const Image&) const = default;
};

/// Angles x detectors grid of line integrals.
struct Sinogram {
  int n_angles = 0;
  int n_detectors = 0;
  std::vector<double> data;

  Sinogram() = default;
  Sinogram(int angles, int detectors, double fill = 0.0)
      : n_angles(angles),
        n_detectors(detectors),
        data(static_cast<std::size_t>(angles) * detectors, fill) {}

  double& operator()(int angle, int bin) {
    return data[static_cast<std::size_t>(angle) * n_detectors + bin];
  }
  double operator()(int angle, int bin) const {
    return data[static_cast<std::size_t>(angle) * n_detectors + bin];
  }
  std::size_t numel() const { return data.size(); }
  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  bool operator==(const Sinogram&) const = default;
};

}  // namespace hydra
