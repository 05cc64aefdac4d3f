#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hydra {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items are
/// independent, so results do not depend on the worker count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Worker count from an explicit request, else HYDRA_THREADS, else 1.
int resolve_threads(int requested);

/// Seed for an independent RNG stream identified by (base, purpose, index).
std::uint64_t stream_seed(std::uint64_t base, std::uint64_t purpose, std::uint64_t index);

}  // namespace hydra
