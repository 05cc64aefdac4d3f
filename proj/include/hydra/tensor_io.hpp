#pragma once

// On-disk tensor format (all integers little-endian):
//
//   offset  size        field
//   0       8           magic "HYDRATNS"
//   8       1           format version (1)
//   9       1           dtype tag: 0 = f32, 1 = f64
//   10      1           rank
//   11      5           zero padding
//   16      8 * rank    dims (u64)
//   ...                 row-major payload
//
// A rank-0 tensor is a scalar holding one element.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hydra/image.hpp"

namespace hydra {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::uint8_t kTensorFormatVersion = 1;
inline constexpr int kMaxTensorRank = 16;

/// In-memory values are always double; dtype selects the on-disk width.
struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
  DType dtype = DType::f32;

  std::uint64_t numel() const;
  bool operator==(const Tensor&) const = default;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// Throws ParseError on bad magic, version, dtype, truncation or shape overflow.
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

Tensor to_tensor(const Image& img, DType dtype = DType::f32);
Tensor to_tensor(const Sinogram& s, DType dtype = DType::f32);
Image image_from_tensor(const Tensor& t);
Sinogram sinogram_from_tensor(const Tensor& t);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace hydra
