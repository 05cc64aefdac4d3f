#include "hydra/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hydra/errors.hpp"

namespace hydra {

Sinogram apply_poisson_noise(const Sinogram& s, double photons_per_bin, std::uint64_t seed) {
  if (!(photons_per_bin >= 1.0)) throw DomainError("photons_per_bin must be >= 1");
  for (double v : s.data)
    if (v < 0.0) throw DomainError("line integrals must be nonnegative");
  Sinogram out(s.n_angles, s.n_detectors);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    const double mean = photons_per_bin * std::exp(-s.data[i]);
    std::poisson_distribution<long long> poisson(mean);
    const double counts = std::max<long long>(1, poisson(rng));
    out.data[i] = -std::log(counts / photons_per_bin);
  }
  return out;
}

}  // namespace hydra
