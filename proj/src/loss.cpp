#include "hydra/loss.hpp"

#include <cmath>
#include <random>

#include "hydra/errors.hpp"

namespace hydra {

LossMode parse_loss_mode(const std::string& name) {
  if (name == "hydra") return LossMode::hydra;
  if (name == "plain") return LossMode::plain;
  if (name == "tv") return LossMode::tv;
  throw ConfigError("unknown loss mode '" + name + "'");
}

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::hydra: return "hydra";
    case LossMode::plain: return "plain";
    case LossMode::tv: return "tv";
  }
  return "?";
}

void LossConfig::validate() const {
  if (gamma && !(*gamma >= 0.0)) throw ConfigError("loss.gamma must be nonnegative");
  if (!(noise_sigma >= 0.0)) throw ConfigError("loss.noise_sigma must be nonnegative");
  if (mode == LossMode::tv && !(tv_alpha > 0.0)) throw ConfigError("loss.tv_alpha must be positive");
}

Image gaussian_noise(int size, double sigma, std::uint64_t seed) {
  Image e(size);
  if (sigma == 0.0) return e;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& v : e.data) v = normal(rng);
  return e;
}

LossAndGrad surrogate_loss_and_grad(const DenoiserNet& net, const RadonOperator& op,
                                    const LayerConfig& layer, const LossConfig& loss,
                                    const Image& x_star, const Sinogram& y, const Image& noise) {
  layer.validate();
  loss.validate();
  const double norm_sq = op.require_norm_sq();
  const double s = layer.step_scale / norm_sq;
  const std::size_t n = x_star.numel();
  LossAndGrad out;
  out.x_star = x_star;

  // One layer application at the detached equilibrium.
  const Image v = gradient_map(op, x_star, y, s);
  DenoiserTape tape;
  const Image d = denoiser_forward(net, v, &tape);
  Image z(x_star.size);
  for (std::size_t i = 0; i < n; ++i) z.data[i] = layer.lambda * d.data[i] + (1.0 - layer.lambda) * v.data[i];
  const Image x1 = apply_omega(layer.omega, z);

  Sinogram r = radon_forward(op, x1);
  for (std::size_t i = 0; i < r.numel(); ++i) {
    r.data[i] -= y.data[i];
    out.loss.dc += r.data[i] * r.data[i];
  }
  for (auto& v2 : r.data) v2 *= 2.0;
  Image dx1 = radon_adjoint(op, r);

  if (loss.mode == LossMode::tv) {
    out.loss.reg = tv_value(x1, loss.tv_variant);
    const Image sub = tv_subgradient(x1, loss.tv_variant);
    for (std::size_t i = 0; i < n; ++i) dx1.data[i] += loss.tv_alpha * sub.data[i];
  }

  // Through Omega and the mixing: dL/dD = lambda * dL/dz.
  Image cot(x_star.size);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pass = layer.omega == Omega::identity || (z.data[i] > 0.0 && z.data[i] < 1.0);
    cot.data[i] = pass ? layer.lambda * dx1.data[i] : 0.0;
  }
  out.grad = denoiser_vjp(net, tape, cot).params;

  if (loss.mode == LossMode::hydra) {
    Image u = x_star;
    for (std::size_t i = 0; i < n; ++i) u.data[i] += noise.data[i];
    DenoiserTape rtape;
    const Image du = denoiser_forward(net, u, &rtape);
    Image rc(x_star.size);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = du.data[i] - x_star.data[i];
      out.loss.reg += e * e;
      rc.data[i] = 2.0 * e;
    }
    const double gamma = loss.effective_gamma(norm_sq);
    if (gamma != 0.0) {
      const auto g = denoiser_vjp(net, rtape, rc).params;
      for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += gamma * g[i];
    }
  }
  if (!std::isfinite(out.loss.dc) || !std::isfinite(out.loss.reg))
    throw NumericalError("loss is not finite");
  return out;
}

LossAndGrad hybrid_loss_and_grad(const DenoiserNet& net, const RadonOperator& op,
                                 const LayerConfig& layer, const EquilibriumConfig& eq,
                                 const LossConfig& loss, const Sinogram& y,
                                 std::uint64_t noise_seed) {
  auto [x_star, report] = solve_equilibrium(net, op, layer, eq, y);
  const double sigma = loss.mode == LossMode::hydra ? loss.noise_sigma : 0.0;
  const Image noise = gaussian_noise(x_star.size, sigma, noise_seed);
  auto out = surrogate_loss_and_grad(net, op, layer, loss, x_star, y, noise);
  out.solve = std::move(report);
  return out;
}

}  // namespace hydra
