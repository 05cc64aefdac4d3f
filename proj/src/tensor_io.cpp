#include "hydra/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "hydra/errors.hpp"

namespace hydra {

namespace {

constexpr char kMagic[8] = {'H', 'Y', 'D', 'R', 'A', 'T', 'N', 'S'};
constexpr std::size_t kHeaderSize = 16;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t Tensor::numel() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.shape.size() > kMaxTensorRank) throw DimensionError("tensor rank too large");
  if (t.numel() != t.data.size()) throw DimensionError("tensor shape does not match data size");
  const std::size_t width = t.dtype == DType::f32 ? 4 : 8;
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 8 * t.shape.size() + width * t.data.size());
  out.resize(kHeaderSize, 0);
  std::memcpy(out.data(), kMagic, 8);
  out[8] = kTensorFormatVersion;
  out[9] = static_cast<std::uint8_t>(t.dtype);
  out[10] = static_cast<std::uint8_t>(t.shape.size());
  for (auto d : t.shape) put_u64(out, d);
  for (double v : t.data) {
    if (t.dtype == DType::f32) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    } else {
      put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize) throw ParseError("tensor file truncated in header");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw ParseError("bad tensor magic");
  if (bytes[8] != kTensorFormatVersion)
    throw ParseError("unsupported tensor format version " + std::to_string(bytes[8]));
  Tensor t;
  if (bytes[9] == 0) {
    t.dtype = DType::f32;
  } else if (bytes[9] == 1) {
    t.dtype = DType::f64;
  } else {
    throw ParseError("unknown tensor dtype tag " + std::to_string(bytes[9]));
  }
  const std::size_t rank = bytes[10];
  if (rank > kMaxTensorRank) throw ParseError("tensor rank too large");
  if (bytes.size() < kHeaderSize + 8 * rank) throw ParseError("tensor file truncated in shape");
  const std::size_t width = t.dtype == DType::f32 ? 4 : 8;
  const std::uint64_t max_elems = (bytes.size() - kHeaderSize - 8 * rank) / width;
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint64_t d = get_u64(bytes.data() + kHeaderSize + 8 * i);
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d)
      throw ParseError("tensor shape overflows");
    n *= d;
    t.shape.push_back(d);
  }
  if (n > max_elems) throw ParseError("tensor payload truncated");
  const std::size_t payload = kHeaderSize + 8 * rank;
  if (bytes.size() != payload + n * width) throw ParseError("tensor payload has trailing bytes");
  t.data.resize(n);
  const std::uint8_t* p = bytes.data() + payload;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (t.dtype == DType::f32) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
      t.data[i] = std::bit_cast<float>(bits);
    } else {
      t.data[i] = std::bit_cast<double>(get_u64(p + 8 * i));
    }
  }
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  try {
    return decode_tensor(read_file_bytes(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Tensor to_tensor(const Image& img, DType dtype) {
  return Tensor{{static_cast<std::uint64_t>(img.size), static_cast<std::uint64_t>(img.size)},
                img.data, dtype};
}

Tensor to_tensor(const Sinogram& s, DType dtype) {
  return Tensor{
      {static_cast<std::uint64_t>(s.n_angles), static_cast<std::uint64_t>(s.n_detectors)},
      s.data, dtype};
}

Image image_from_tensor(const Tensor& t) {
  if (t.shape.size() != 2 || t.shape[0] != t.shape[1])
    throw DimensionError("image tensor must be square rank-2");
  Image img(static_cast<int>(t.shape[0]));
  img.data = t.data;
  return img;
}

Sinogram sinogram_from_tensor(const Tensor& t) {
  if (t.shape.size() != 2) throw DimensionError("sinogram tensor must be rank-2");
  Sinogram s(static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]));
  s.data = t.data;
  return s;
}

}  // namespace hydra
