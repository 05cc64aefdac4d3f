#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "hydra/denoiser.hpp"
#include "hydra/errors.hpp"
#include "hydra/layer.hpp"
#include "hydra/vec.hpp"
#include "support.hpp"

using namespace hydra;
using hydra::test::random_image;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& e : v) e = g(rng);
  return v;
}

// Direct four-loop zero-padded 3x3 convolution.
std::vector<double> naive_conv(const std::vector<double>& in, int cin, int h, int w,
                               const std::vector<double>& weight, const std::vector<double>& bias,
                               int cout) {
  std::vector<double> out(static_cast<std::size_t>(cout) * h * w, 0.0);
  for (int o = 0; o < cout; ++o)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (int i = 0; i < cin; ++i)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int rr = r + ky - 1, cc = c + kx - 1;
              if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
              acc += weight[((o * cin + i) * 3 + ky) * 3 + kx] * in[(static_cast<std::size_t>(i) * h + rr) * w + cc];
            }
        out[(static_cast<std::size_t>(o) * h + r) * w + c] = acc;
      }
  return out;
}

DenoiserOptions small_options() {
  DenoiserOptions o;
  o.widths = {1, 8, 8, 1};
  o.spectral_size = 16;
  return o;
}

double empirical_lipschitz(const DenoiserNet& net, int size, int pairs, std::uint64_t seed) {
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const Image a = random_image(size, seed + 2 * k, -0.5, 1.5);
    const Image b = random_image(size, seed + 2 * k + 1, -0.5, 1.5);
    const Image da = denoiser_forward(net, a), db = denoiser_forward(net, b);
    worst = std::max(worst, vec::dist(da.data, db.data) / vec::dist(a.data, b.data));
  }
  return worst;
}

// Converged power iteration on one conv layer at the given spatial size.
double layer_norm_oracle(const DenoiserNet& net, int l, int size, int iters) {
  const auto& L = net.layer(l);
  const std::size_t hw = static_cast<std::size_t>(size) * size;
  std::vector<double> u = random_vector(L.in_ch * hw, 77), wu(L.out_ch * hw), wtwu(L.in_ch * hw);
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    vec::scale(1.0 / vec::norm(u), u);
    conv3x3_forward(u, L.in_ch, size, size, net.weight(l), {}, L.out_ch, wu);
    sigma = vec::norm(wu);
    conv3x3_transpose(wu, L.out_ch, size, size, net.weight(l), L.in_ch, wtwu);
    u = wtwu;
  }
  return sigma;
}

}  // namespace

TEST_CASE("conv3x3 matches a direct loop and its transpose is the adjoint") {
  const int cin = 3, cout = 4, h = 7, w = 5;
  const auto in = random_vector(cin * h * w, 1);
  const auto weight = random_vector(cout * cin * 9, 2);
  const auto bias = random_vector(cout, 3);
  std::vector<double> out(cout * h * w);
  conv3x3_forward(in, cin, h, w, weight, bias, cout, out);
  CHECK(hydra::test::max_abs_diff(out, naive_conv(in, cin, h, w, weight, bias, cout)) < 1e-12);

  const auto dout = random_vector(cout * h * w, 4);
  std::vector<double> wx(cout * h * w), din(cin * h * w);
  conv3x3_forward(in, cin, h, w, weight, {}, cout, wx);
  conv3x3_transpose(dout, cout, h, w, weight, cin, din);
  CHECK(vec::dot(wx, dout) == doctest::Approx(vec::dot(in, din)).epsilon(1e-12));
}

TEST_CASE("all-zero network outputs zero") {
  DenoiserOptions o = small_options();
  o.skip = 0.0;
  const DenoiserNet net(o);
  const Image out = denoiser_forward(net, random_image(12, 5));
  CHECK(out.size == 12);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("skip path scales the input") {
  DenoiserOptions o = small_options();
  o.skip = 0.7;
  const DenoiserNet net(o);
  const Image v = random_image(12, 6);
  const Image out = denoiser_forward(net, v);
  for (std::size_t i = 0; i < v.numel(); ++i) CHECK(out.data[i] == 0.7 * v.data[i]);
  const auto g = denoiser_vjp(net, v, v);
  for (std::size_t i = 0; i < v.numel(); ++i) CHECK(g.input.data[i] == 0.7 * v.data[i]);
  CHECK(net.layer_budget() == doctest::Approx(std::pow(0.2, 1.0 / 3)));

  o.skip = o.lipschitz_budget;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o.skip = -0.1;
  CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("initialized network respects the Lipschitz budget") {
  DenoiserOptions o;
  o.spectral_size = 32;
  const auto net = DenoiserNet::initialized(o, 11);
  CHECK(net.lipschitz_estimate() <= o.lipschitz_budget * (1.0 + 1e-12));
  CHECK(empirical_lipschitz(net, 24, 100, 1000) <= o.lipschitz_budget + 1e-6);
}

TEST_CASE("network is continuous with local ratios under budget") {
  const auto net = DenoiserNet::initialized(small_options(), 3);
  const Image v = random_image(16, 8);
  const auto dir = random_vector(v.numel(), 9);
  const double dn = vec::norm(dir);
  const Image dv = denoiser_forward(net, v);
  for (double radius : {1e-2, 1e-4, 1e-6}) {
    Image w = v;
    for (std::size_t i = 0; i < w.numel(); ++i) w.data[i] += radius * dir[i] / dn;
    const double change = vec::dist(denoiser_forward(net, w).data, dv.data);
    CHECK(change / radius <= net.options().lipschitz_budget + 1e-6);
  }
}

TEST_CASE("shape is preserved and odd inputs are rejected") {
  const auto net = DenoiserNet::initialized(small_options(), 3);
  CHECK(denoiser_forward(net, random_image(9, 1)).size == 9);
  Image bad(4);
  bad.data.pop_back();
  CHECK_THROWS_AS(denoiser_forward(net, bad), DimensionError);
}

TEST_CASE("vjp matches central differences on 8x8") {
  auto net = DenoiserNet::initialized(small_options(), 21);
  for (auto& p : net.params()) p *= 1.3;  // off the normalization fixed point
  const Image v = random_image(8, 22, -0.5, 1.5);
  const Image cot = random_image(8, 23, -1.0, 1.0);
  const auto grad = denoiser_vjp(net, v, cot);
  auto loss = [&](const DenoiserNet& n, const Image& x) { return vec::dot(denoiser_forward(n, x).data, cot.data); };

  std::mt19937_64 rng(5);
  const double h = 1e-4;
  for (int k = 0; k < 5; ++k) {
    const int l = static_cast<int>(rng() % net.n_layers());
    const std::size_t idx = net.layer(l).weight_offset + rng() % net.layer(l).weight_count();
    DenoiserNet plus = net, minus = net;
    plus.params()[idx] += h;
    minus.params()[idx] -= h;
    const double fd = (loss(plus, v) - loss(minus, v)) / (2 * h);
    CHECK(std::abs(fd - grad.params[idx]) / (std::abs(grad.params[idx]) + 1e-8) < 1e-3);
  }
  for (int l = 0; l < net.n_layers(); ++l) {
    const std::size_t idx = net.layer(l).bias_offset;
    DenoiserNet plus = net, minus = net;
    plus.params()[idx] += h;
    minus.params()[idx] -= h;
    const double fd = (loss(plus, v) - loss(minus, v)) / (2 * h);
    CHECK(std::abs(fd - grad.params[idx]) / (std::abs(grad.params[idx]) + 1e-8) < 1e-3);
  }
  for (int k = 0; k < 5; ++k) {
    const std::size_t idx = rng() % v.numel();
    Image plus = v, minus = v;
    plus.data[idx] += h;
    minus.data[idx] -= h;
    const double fd = (loss(net, plus) - loss(net, minus)) / (2 * h);
    CHECK(std::abs(fd - grad.input.data[idx]) / (std::abs(grad.input.data[idx]) + 1e-8) < 1e-3);
  }
}

TEST_CASE("vjp is linear in the cotangent") {
  const auto net = DenoiserNet::initialized(small_options(), 4);
  const Image v = random_image(10, 1);
  const auto zero = denoiser_vjp(net, v, Image(10));
  for (double g : zero.params) CHECK(g == 0.0);
  for (double g : zero.input.data) CHECK(g == 0.0);

  const Image c1 = random_image(10, 2, -1.0, 1.0), c2 = random_image(10, 3, -1.0, 1.0);
  const double a = -1.7;
  Image mix(10);
  for (std::size_t i = 0; i < mix.numel(); ++i) mix.data[i] = a * c1.data[i] + c2.data[i];
  const auto g1 = denoiser_vjp(net, v, c1), g2 = denoiser_vjp(net, v, c2), gm = denoiser_vjp(net, v, mix);
  for (std::size_t i = 0; i < gm.params.size(); ++i)
    CHECK(gm.params[i] == doctest::Approx(a * g1.params[i] + g2.params[i]).epsilon(1e-9).scale(1e-12));
  for (std::size_t i = 0; i < gm.input.numel(); ++i)
    CHECK(gm.input.data[i] == doctest::Approx(a * g1.input.data[i] + g2.input.data[i]).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("normalization caps an inflated orthogonal layer") {
  auto net = DenoiserNet::initialized(small_options(), 6);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Random(8, 8));
  const Eigen::MatrixXd q = qr.householderQ();
  auto w = net.weight(1);
  std::fill(w.begin(), w.end(), 0.0);
  for (int o = 0; o < 8; ++o)
    for (int i = 0; i < 8; ++i) w[((o * 8 + i) * 3 + 1) * 3 + 1] = 5.0 * q(o, i);
  CHECK(layer_norm_oracle(net, 1, 16, 50) == doctest::Approx(5.0).epsilon(1e-9));
  normalize_spectral(net);
  const double cap = net.layer_budget();
  for (int l = 0; l < net.n_layers(); ++l) CHECK(layer_norm_oracle(net, l, 16, 300) <= cap * 1.05);
}

TEST_CASE("normalization leaves a compliant network alone") {
  auto net = DenoiserNet::initialized(small_options(), 7);
  for (auto& p : net.params()) p *= 0.5;
  const std::vector<double> before(net.params().begin(), net.params().end());
  normalize_spectral(net);
  CHECK(hydra::test::max_abs_diff(before, {net.params().begin(), net.params().end()}) <= 1e-7);
}

TEST_CASE("repeated normalization converges") {
  DenoiserOptions o = small_options();
  o.skip = 0.0;
  auto net = DenoiserNet::initialized(o, 8);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto& p : net.params()) p += g(rng);
  std::vector<double> steps;
  std::vector<double> prev(net.params().begin(), net.params().end());
  for (int k = 0; k < 20; ++k) {
    normalize_spectral(net);
    std::vector<double> cur(net.params().begin(), net.params().end());
    steps.push_back(hydra::test::diff_norm(prev, cur));
    prev = std::move(cur);
  }
  CHECK(steps.back() < 1e-2 * vec::norm(prev));
  CHECK(steps.back() < 1e-2 * steps.front());
  for (std::size_t k = steps.size() - 5; k < steps.size(); ++k) CHECK(steps[k] < steps[k - 1]);
  CHECK(net.lipschitz_estimate() <= net.options().lipschitz_budget * (1.0 + 1e-12));
}

TEST_CASE("omega projection") {
  Image x(2);
  x.data = {-0.3, 1.7, 0.25, 1.0};
  const Image p = omega_project(x);
  CHECK(p.data == std::vector<double>{0.0, 1.0, 0.25, 1.0});
  CHECK(omega_project(p) == p);
  const Image inside = random_image(6, 3);
  CHECK(omega_project(inside) == inside);
  for (int k = 0; k < 20; ++k) {
    const Image a = random_image(6, 10 + k, -1.0, 2.0), b = random_image(6, 40 + k, -1.0, 2.0);
    CHECK(vec::dist(omega_project(a).data, omega_project(b).data) <= vec::dist(a.data, b.data));
  }
  CHECK(apply_omega(Omega::identity, x) == x);
}

TEST_CASE("layer config rejects lambda outside the open interval") {
  LayerConfig c;
  c.lambda = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lambda = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lambda = 0.4;
  CHECK_NOTHROW(c.validate());
  c.step_scale = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("equilibrium layer is a contraction with the predicted factor") {
  auto op = RadonOperator::parallel_beam(16, 48, 16);
  estimate_operator_norm(op, 200, 1);
  DenoiserOptions o = small_options();
  const auto net = DenoiserNet::initialized(o, 12);
  const Sinogram y = radon_forward(op, random_image(16, 2));
  for (Omega omega : {Omega::clamp, Omega::identity}) {
    LayerConfig cfg;
    cfg.omega = omega;
    const double bound = cfg.lambda * o.lipschitz_budget + (1.0 - cfg.lambda);
    for (int k = 0; k < 30; ++k) {
      const Image a = random_image(16, 100 + k, -0.5, 1.5), b = random_image(16, 200 + k, -0.5, 1.5);
      const double ratio = vec::dist(layer_apply(net, op, cfg, a, y).data, layer_apply(net, op, cfg, b, y).data) /
                           vec::dist(a.data, b.data);
      CHECK(ratio <= bound + 1e-6);
    }
  }
}
