#include "hydra/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hydra/errors.hpp"

namespace hydra {

namespace {

struct Ellipse {
  double cx, cy, a, b, phi, value;
};

}  // namespace

bool inside_field_of_view(int size, int row, int col) {
  const double half = 0.5 * (size - 1);
  const double r = 0.5 * size;
  const double x = (col - half) / r;
  const double y = (half - row) / r;
  return x * x + y * y <= 1.0;
}

Image gen_phantom(const PhantomConfig& cfg, std::uint64_t index) {
  if (cfg.size < 1) throw ConfigError("phantom size must be positive");
  if (cfg.min_ellipses < 0 || cfg.max_ellipses < cfg.min_ellipses)
    throw ConfigError("invalid ellipse count range");
  if (cfg.min_intensity > cfg.max_intensity) throw ConfigError("invalid intensity range");

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const int count = std::uniform_int_distribution<int>(cfg.min_ellipses, cfg.max_ellipses)(rng);

  std::vector<Ellipse> ellipses;
  for (int e = 0; e < count; ++e) {
    Ellipse el{};
    el.phi = uniform(0.0, std::numbers::pi);
    if (e == 0) {
      el.cx = uniform(-0.08, 0.08);
      el.cy = uniform(-0.08, 0.08);
      el.a = uniform(0.65, 0.88);
      el.b = uniform(0.5, 0.8);
      const double lo = std::clamp(0.25, cfg.min_intensity, cfg.max_intensity);
      el.value = uniform(lo, std::max(lo, cfg.max_intensity));
    } else {
      const double rad = 0.55 * std::sqrt(uniform(0.0, 1.0));
      const double ang = uniform(0.0, 2.0 * std::numbers::pi);
      el.cx = rad * std::cos(ang);
      el.cy = rad * std::sin(ang);
      el.a = uniform(0.05, 0.35);
      el.b = uniform(0.05, 0.35);
      el.value = uniform(cfg.min_intensity, cfg.max_intensity);
    }
    ellipses.push_back(el);
  }

  Image img(cfg.size);
  const double half = 0.5 * (cfg.size - 1);
  const double r = 0.5 * cfg.size;
  for (int row = 0; row < cfg.size; ++row) {
    for (int col = 0; col < cfg.size; ++col) {
      if (!inside_field_of_view(cfg.size, row, col)) continue;
      const double x = (col - half) / r;
      const double y = (half - row) / r;
      double v = 0.0;
      for (const auto& el : ellipses) {
        const double dx = x - el.cx;
        const double dy = y - el.cy;
        const double u = dx * std::cos(el.phi) + dy * std::sin(el.phi);
        const double w = -dx * std::sin(el.phi) + dy * std::cos(el.phi);
        if ((u * u) / (el.a * el.a) + (w * w) / (el.b * el.b) <= 1.0) v += el.value;
      }
      img(row, col) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace hydra
