#include "hydra/adam.hpp"

#include <cmath>

#include "hydra/errors.hpp"

namespace hydra {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adam.lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam.beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam.eps must be positive");
}

void adam_step(AdamState& state, const AdamConfig& cfg, std::span<double> params,
               std::span<const double> grad) {
  if (grad.size() != params.size()) throw DimensionError("gradient size does not match parameters");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw DimensionError("optimizer state size does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void optimizer_step(DenoiserNet& net, AdamState& state, const AdamConfig& cfg,
                    std::span<const double> grad) {
  adam_step(state, cfg, net.params(), grad);
  normalize_spectral(net);
}

}  // namespace hydra
