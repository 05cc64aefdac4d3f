#pragma once

#include <cstdint>

#include "hydra/image.hpp"

namespace hydra {

/// Beer-Lambert photon noise on post-log data: counts ~ Poisson(N0 exp(-s)),
/// clamped to at least one photon, returned as -log(counts / N0).
/// Throws DomainError on negative line integrals.
Sinogram apply_poisson_noise(const Sinogram& s, double photons_per_bin, std::uint64_t seed);

}  // namespace hydra
