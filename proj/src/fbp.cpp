#include "hydra/fbp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include "hydra/errors.hpp"

namespace hydra {

namespace {

// FFTW planning is not thread safe; execution on a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int padded_length(int n) {
  int p = 64;
  while (p < 2 * n) p *= 2;
  return p;
}

class RowFilter {
 public:
  RowFilter(int n_det, const FbpConfig& cfg) : n_(n_det), p_(padded_length(n_det)) {
    buf_ = fftw_alloc_real(p_);
    spec_ = fftw_alloc_complex(p_ / 2 + 1);
    {
      std::lock_guard lock(planner_mutex());
      fwd_ = fftw_plan_dft_r2c_1d(p_, buf_, spec_, FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_c2r_1d(p_, spec_, buf_, FFTW_ESTIMATE);
    }
    build_response(cfg);
  }
  ~RowFilter() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(inv_);
    }
    fftw_free(buf_);
    fftw_free(spec_);
  }
  RowFilter(const RowFilter&) = delete;
  RowFilter& operator=(const RowFilter&) = delete;

  void apply(double* row) {
    std::fill(buf_, buf_ + p_, 0.0);
    std::copy(row, row + n_, buf_);
    fftw_execute(fwd_);
    for (int f = 0; f <= p_ / 2; ++f) {
      spec_[f][0] *= response_[f];
      spec_[f][1] *= response_[f];
    }
    fftw_execute(inv_);
    const double inv_p = 1.0 / p_;
    for (int i = 0; i < n_; ++i) row[i] = buf_[i] * inv_p;
  }

 private:
  // Frequency response of the band-limited ramp taken from its spatial kernel
  // h[0] = 1/4, h[odd k] = -1/(pi k)^2, which avoids the DC offset of a
  // sampled |w|.
  void build_response(const FbpConfig& cfg) {
    std::fill(buf_, buf_ + p_, 0.0);
    buf_[0] = 0.25;
    for (int k = 1; k < p_ / 2; k += 2) {
      const double v = -1.0 / (std::numbers::pi * std::numbers::pi * k * k);
      buf_[k] = v;
      buf_[p_ - k] = v;
    }
    fftw_execute(fwd_);
    response_.resize(p_ / 2 + 1);
    const double nyquist = p_ / 2.0;
    for (int f = 0; f <= p_ / 2; ++f) {
      const double rel = f / nyquist;  // fraction of Nyquist
      double r = spec_[f][0];
      if (rel > cfg.cutoff) {
        r = 0.0;
      } else if (cfg.filter == FilterKind::hann) {
        r *= 0.5 + 0.5 * std::cos(std::numbers::pi * rel / cfg.cutoff);
      }
      response_[f] = r;
    }
  }

  int n_;
  int p_;
  double* buf_;
  fftw_complex* spec_;
  fftw_plan fwd_;
  fftw_plan inv_;
  std::vector<double> response_;
};

}  // namespace

FilterKind parse_filter_kind(const std::string& name) {
  if (name == "ram-lak") return FilterKind::ram_lak;
  if (name == "hann") return FilterKind::hann;
  if (name == "none") return FilterKind::none;
  throw ConfigError("unknown filter kind '" + name + "'");
}

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::ram_lak: return "ram-lak";
    case FilterKind::hann: return "hann";
    case FilterKind::none: return "none";
  }
  return "?";
}

void filter_projections(Sinogram& s, const FbpConfig& cfg) {
  if (!(cfg.cutoff > 0.0 && cfg.cutoff <= 1.0)) throw ConfigError("FBP cutoff must lie in (0, 1]");
  if (cfg.filter == FilterKind::none) return;
  RowFilter filter(s.n_detectors, cfg);
  for (int a = 0; a < s.n_angles; ++a) filter.apply(&s(a, 0));
}

Image fbp(const RadonOperator& op, const Sinogram& s, const FbpConfig& cfg) {
  if (s.n_angles != op.n_angles() || s.n_detectors != op.n_detectors())
    throw DimensionError("fbp: sinogram geometry mismatch");
  Sinogram filtered = s;
  filter_projections(filtered, cfg);
  Image x = radon_adjoint(op, filtered);
  // The backprojector carries pixel_size per unit ray length and the data are
  // line integrals in physical units; both cancel against 1/pixel_size^2.
  const double ps = op.geometry().pixel_size;
  const double scale = std::numbers::pi / op.n_angles() / (ps * ps);
  for (auto& v : x.data) {
    v *= scale;
    if (cfg.clamp) v = std::clamp(v, 0.0, 1.0);
  }
  return x;
}

}  // namespace hydra
