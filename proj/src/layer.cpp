#include "hydra/layer.hpp"

#include <algorithm>

#include "hydra/errors.hpp"

namespace hydra {

Omega parse_omega(const std::string& name) {
  if (name == "clamp") return Omega::clamp;
  if (name == "identity") return Omega::identity;
  throw ConfigError("unknown omega '" + name + "'");
}

std::string to_string(Omega o) { return o == Omega::clamp ? "clamp" : "identity"; }

void LayerConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("layer.lambda must lie in (0, 1)");
  if (!(step_scale > 0.0 && step_scale < 1.0))
    throw ConfigError("layer.step_scale must lie in (0, 1)");
}

Image omega_project(const Image& x) {
  Image out = x;
  for (auto& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Image apply_omega(Omega o, const Image& x) { return o == Omega::clamp ? omega_project(x) : x; }

Image gradient_map(const RadonOperator& op, const Image& x, const Sinogram& y, double s) {
  if (y.n_angles != op.n_angles() || y.n_detectors != op.n_detectors())
    throw DimensionError("gradient_map: sinogram geometry mismatch");
  Sinogram r = radon_forward(op, x);
  for (std::size_t i = 0; i < r.numel(); ++i) r.data[i] -= y.data[i];
  const Image back = radon_adjoint(op, r);
  Image v = x;
  for (std::size_t i = 0; i < v.numel(); ++i) v.data[i] -= 2.0 * s * back.data[i];
  return v;
}

Image mix_denoiser(const DenoiserNet& net, double lambda, const Image& v) {
  Image d = denoiser_forward(net, v);
  for (std::size_t i = 0; i < d.numel(); ++i) d.data[i] = lambda * d.data[i] + (1.0 - lambda) * v.data[i];
  return d;
}

Image layer_apply(const DenoiserNet& net, const RadonOperator& op, const LayerConfig& cfg,
                  const Image& x, const Sinogram& y) {
  cfg.validate();
  const double s = cfg.step_scale / op.require_norm_sq();
  return apply_omega(cfg.omega, mix_denoiser(net, cfg.lambda, gradient_map(op, x, y, s)));
}

}  // namespace hydra
