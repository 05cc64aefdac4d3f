#pragma once

#include <cstdint>

#include "hydra/image.hpp"

namespace hydra {

/// Random-ellipse phantom family. The first ellipse is a large positive "body";
/// the rest are smaller inclusions with additive intensities.
struct PhantomConfig {
  int size = 64;
  int min_ellipses = 3;
  int max_ellipses = 8;
  double min_intensity = -0.5;
  double max_intensity = 0.5;
  std::uint64_t seed = 0;

  bool operator==(const PhantomConfig&) const = default;
};

/// Deterministic in (cfg.seed, index). Values clamped to [0, 1], zero outside
/// the inscribed circle.
Image gen_phantom(const PhantomConfig& cfg, std::uint64_t index);

/// Indicator of the inscribed circle (the reconstruction field of view).
bool inside_field_of_view(int size, int row, int col);

}  // namespace hydra
