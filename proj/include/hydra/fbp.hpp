#pragma once

#include <string>

#include "hydra/image.hpp"
#include "hydra/radon.hpp"

namespace hydra {

enum class FilterKind { ram_lak, hann, none };

FilterKind parse_filter_kind(const std::string& name);
std::string to_string(FilterKind kind);

struct FbpConfig {
  FilterKind filter = FilterKind::ram_lak;
  double cutoff = 1.0;  ///< fraction of Nyquist, in (0, 1]
  bool clamp = false;   ///< clamp the result to [0, 1]

  bool operator==(const FbpConfig&) const = default;
};

/// Filtered backprojection: ramp-type filtering of every projection along the
/// detector axis, backprojection with the matched adjoint, then the Riemann
/// scale pi / n_angles. FilterKind::none gives the scaled plain backprojection.
Image fbp(const RadonOperator& op, const Sinogram& s, const FbpConfig& cfg = {});

/// Filter every projection row in place (exposed for tests).
void filter_projections(Sinogram& s, const FbpConfig& cfg);

}  // namespace hydra
