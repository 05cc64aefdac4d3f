#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "hydra/image.hpp"
#include "hydra/radon.hpp"

namespace hydra::test {

inline Image random_image(int n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image x(n);
  for (auto& v : x.data) v = u(rng);
  return x;
}

inline Sinogram random_sinogram(int angles, int detectors, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Sinogram s(angles, detectors);
  for (auto& v : s.data) v = g(rng);
  return s;
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

inline double diff_norm(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Dense matrix of the masked forward operator, built column by column.
inline Eigen::MatrixXd dense_matrix(const RadonOperator& op) {
  const int n = static_cast<int>(op.image_numel());
  const int m = static_cast<int>(op.sinogram_numel());
  Eigen::MatrixXd a(m, n);
  Image e(op.image_size());
  for (int j = 0; j < n; ++j) {
    e.data.assign(e.data.size(), 0.0);
    e.data[j] = 1.0;
    const Sinogram col = radon_forward(op, e);
    for (int i = 0; i < m; ++i) a(i, j) = col.data[i];
  }
  return a;
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hydra_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace hydra::test
