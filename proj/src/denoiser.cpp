#include "hydra/denoiser.hpp"

#include <Eigen/Core>
#include <cmath>
#include <random>

#include "hydra/errors.hpp"
#include "hydra/vec.hpp"

namespace hydra {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// col[(c*9 + ky*3 + kx), y*W + x] = in[c, y+ky-1, x+kx-1] (zero outside)
void im2col(std::span<const double> in, int ch, int h, int w, std::vector<double>& col) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  col.assign(static_cast<std::size_t>(ch) * 9 * hw, 0.0);
  for (int c = 0; c < ch; ++c) {
    const double* src = in.data() + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1;
        const int dx = kx - 1;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
          const double* s = src + static_cast<std::size_t>(y + dy) * w + dx;
          double* d = dst + static_cast<std::size_t>(y) * w;
          for (int x = x0; x < x1; ++x) d[x] = s[x];
        }
      }
    }
  }
}

// Adjoint of im2col: accumulate columns back onto the input grid.
void col2im(const std::vector<double>& col, int ch, int h, int w, std::span<double> out) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::fill(out.begin(), out.end(), 0.0);
  for (int c = 0; c < ch; ++c) {
    double* dst = out.data() + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1;
        const int dx = kx - 1;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
          double* d = dst + static_cast<std::size_t>(y + dy) * w + dx;
          const double* s = src + static_cast<std::size_t>(y) * w;
          for (int x = x0; x < x1; ++x) d[x] += s[x];
        }
      }
    }
  }
}

thread_local std::vector<double> t_col;

}  // namespace

void conv3x3_forward(std::span<const double> in, int in_ch, int height, int width,
                     std::span<const double> weight, std::span<const double> bias, int out_ch,
                     std::span<double> out) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (in.size() != in_ch * hw || out.size() != out_ch * hw ||
      weight.size() != static_cast<std::size_t>(out_ch) * in_ch * 9)
    throw DimensionError("conv3x3_forward: operand sizes disagree");
  im2col(in, in_ch, height, width, t_col);
  ConstMapMat w(weight.data(), out_ch, in_ch * 9);
  ConstMapMat col(t_col.data(), in_ch * 9, static_cast<Eigen::Index>(hw));
  MapMat o(out.data(), out_ch, static_cast<Eigen::Index>(hw));
  o.noalias() = w * col;
  if (!bias.empty())
    for (int c = 0; c < out_ch; ++c) o.row(c).array() += bias[c];
}

void conv3x3_transpose(std::span<const double> dout, int out_ch, int height, int width,
                       std::span<const double> weight, int in_ch, std::span<double> din) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (dout.size() != out_ch * hw || din.size() != in_ch * hw)
    throw DimensionError("conv3x3_transpose: operand sizes disagree");
  t_col.resize(static_cast<std::size_t>(in_ch) * 9 * hw);
  ConstMapMat w(weight.data(), out_ch, in_ch * 9);
  ConstMapMat g(dout.data(), out_ch, static_cast<Eigen::Index>(hw));
  MapMat col(t_col.data(), in_ch * 9, static_cast<Eigen::Index>(hw));
  col.noalias() = w.transpose() * g;
  std::vector<double> tmp = std::move(t_col);
  col2im(tmp, in_ch, height, width, din);
  t_col = std::move(tmp);
}

void DenoiserOptions::validate() const {
  if (widths.size() < 2) throw ConfigError("network needs at least one layer");
  if (widths.front() != 1 || widths.back() != 1)
    throw ConfigError("network must map one channel to one channel");
  for (int w : widths)
    if (w < 1) throw ConfigError("channel widths must be positive");
  if (!(lipschitz_budget > 0.0 && lipschitz_budget < 1.0))
    throw ConfigError("lipschitz_budget must lie in (0, 1)");
  if (!(leaky_slope >= 0.0 && leaky_slope <= 1.0))
    throw ConfigError("leaky_slope must lie in [0, 1]");
  if (!(skip >= 0.0 && skip < lipschitz_budget))
    throw ConfigError("skip must lie in [0, lipschitz_budget)");
  if (spectral_size < 3) throw ConfigError("spectral_size must be >= 3");
}

DenoiserNet::DenoiserNet(DenoiserOptions options) : options_(std::move(options)) {
  options_.validate();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < options_.widths.size(); ++l) {
    Layer layer;
    layer.in_ch = options_.widths[l];
    layer.out_ch = options_.widths[l + 1];
    layer.weight_offset = offset;
    offset += layer.weight_count();
    layer.bias_offset = offset;
    offset += layer.out_ch;
    layers_.push_back(layer);
  }
  params_.assign(offset, 0.0);
  power_u_.resize(layers_.size());
  sigma_.assign(layers_.size(), 0.0);
}

DenoiserNet DenoiserNet::initialized(DenoiserOptions options, std::uint64_t seed,
                                     int warmup_power_iters) {
  DenoiserNet net(std::move(options));
  std::mt19937_64 rng(seed);
  const double a = net.options_.leaky_slope;
  for (int l = 0; l < net.n_layers(); ++l) {
    const double fan_in = net.layers_[l].in_ch * 9.0;
    const double bound = std::sqrt(6.0 / ((1.0 + a * a) * fan_in));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (auto& w : net.weight(l)) w = uni(rng);
  }
  normalize_spectral(net, warmup_power_iters);
  return net;
}

std::span<double> DenoiserNet::weight(int l) {
  return std::span<double>(params_).subspan(layers_[l].weight_offset, layers_[l].weight_count());
}
std::span<const double> DenoiserNet::weight(int l) const {
  return std::span<const double>(params_).subspan(layers_[l].weight_offset,
                                                  layers_[l].weight_count());
}
std::span<double> DenoiserNet::bias(int l) {
  return std::span<double>(params_).subspan(layers_[l].bias_offset, layers_[l].out_ch);
}
std::span<const double> DenoiserNet::bias(int l) const {
  return std::span<const double>(params_).subspan(layers_[l].bias_offset, layers_[l].out_ch);
}

double DenoiserNet::lipschitz_estimate() const {
  double p = 1.0;
  for (double s : sigma_) p *= s;
  return options_.skip + p;
}

double DenoiserNet::layer_budget() const {
  return std::pow(options_.lipschitz_budget - options_.skip, 1.0 / n_layers());
}

Image denoiser_forward(const DenoiserNet& net, const Image& v, DenoiserTape* tape) {
  const int n = v.size;
  const std::size_t hw = v.numel();
  if (tape) {
    tape->size = n;
    tape->inputs.assign(net.n_layers(), {});
    tape->pre.assign(net.n_layers(), {});
  }
  std::vector<double> cur = v.data;
  std::vector<double> next;
  const double slope = net.options().leaky_slope;
  for (int l = 0; l < net.n_layers(); ++l) {
    const auto& L = net.layer(l);
    next.resize(L.out_ch * hw);
    conv3x3_forward(cur, L.in_ch, n, n, net.weight(l), net.bias(l), L.out_ch, next);
    if (tape) {
      tape->inputs[l] = cur;
      tape->pre[l] = next;
    }
    if (l + 1 < net.n_layers())
      for (auto& z : next) z = z > 0.0 ? z : slope * z;
    std::swap(cur, next);
  }
  if (const double beta = net.options().skip; beta != 0.0)
    for (std::size_t i = 0; i < hw; ++i) cur[i] += beta * v.data[i];
  Image out(n);
  out.data = std::move(cur);
  return out;
}

DenoiserGrad denoiser_vjp(const DenoiserNet& net, const Image& v, const Image& cotangent) {
  DenoiserTape tape;
  denoiser_forward(net, v, &tape);
  return denoiser_vjp(net, tape, cotangent);
}

DenoiserGrad denoiser_vjp(const DenoiserNet& net, const DenoiserTape& tape, const Image& cotangent) {
  const int n = tape.size;
  const std::size_t hw = static_cast<std::size_t>(n) * n;
  if (cotangent.size != n) throw DimensionError("denoiser_vjp: cotangent size mismatch");
  DenoiserGrad g;
  g.params.assign(net.params().size(), 0.0);
  std::vector<double> delta = cotangent.data;  // gradient w.r.t. the layer output
  const double slope = net.options().leaky_slope;
  std::vector<double> col, din;
  for (int l = net.n_layers() - 1; l >= 0; --l) {
    const auto& L = net.layer(l);
    if (l + 1 < net.n_layers()) {
      const auto& pre = tape.pre[l];
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (pre[i] <= 0.0) delta[i] *= slope;
    }
    ConstMapMat dout(delta.data(), L.out_ch, static_cast<Eigen::Index>(hw));
    im2col(tape.inputs[l], L.in_ch, n, n, col);
    ConstMapMat colm(col.data(), L.in_ch * 9, static_cast<Eigen::Index>(hw));
    MapMat dw(g.params.data() + L.weight_offset, L.out_ch, L.in_ch * 9);
    dw.noalias() = dout * colm.transpose();
    for (int c = 0; c < L.out_ch; ++c) {
      const double* row = delta.data() + c * hw;
      double sum = 0.0;
      for (std::size_t i = 0; i < hw; ++i) sum += row[i];
      g.params[L.bias_offset + c] = sum;
    }
    din.resize(L.in_ch * hw);
    conv3x3_transpose(delta, L.out_ch, n, n, net.weight(l), L.in_ch, din);
    delta.swap(din);
  }
  if (const double beta = net.options().skip; beta != 0.0)
    for (std::size_t i = 0; i < hw; ++i) delta[i] += beta * cotangent.data[i];
  g.input = Image(n);
  g.input.data = std::move(delta);
  return g;
}

double power_iterate_layer(DenoiserNet& net, int l, int steps) {
  const auto& L = net.layer(l);
  const int s = net.options().spectral_size;
  const std::size_t hw = static_cast<std::size_t>(s) * s;
  auto& u = net.power_vector(l);
  if (u.size() != L.in_ch * hw) {
    std::mt19937_64 rng(0x5eed0000ULL + l);
    std::normal_distribution<double> normal;
    u.resize(L.in_ch * hw);
    for (auto& x : u) x = normal(rng);
    vec::scale(1.0 / vec::norm(u), u);
  }
  std::vector<double> wu(L.out_ch * hw), wtwu(L.in_ch * hw);
  double sigma = 0.0;
  for (int it = 0; it < steps; ++it) {
    conv3x3_forward(u, L.in_ch, s, s, net.weight(l), {}, L.out_ch, wu);
    conv3x3_transpose(wu, L.out_ch, s, s, net.weight(l), L.in_ch, wtwu);
    const double nrm = vec::norm(wtwu);  // ||W^T W u|| for unit u
    sigma = std::sqrt(nrm);
    if (nrm == 0.0) break;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = wtwu[i] / nrm;
  }
  net.set_sigma(l, sigma);
  return sigma;
}

void normalize_spectral(DenoiserNet& net, int power_steps) {
  const double cap = net.layer_budget();
  for (int l = 0; l < net.n_layers(); ++l) {
    const double sigma = power_iterate_layer(net, l, std::max(1, power_steps));
    if (sigma > cap) {
      vec::scale(cap / sigma, net.weight(l));
      net.set_sigma(l, cap);
    }
  }
}

}  // namespace hydra
