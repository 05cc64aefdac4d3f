#include "hydra/fixed_point.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "hydra/errors.hpp"
#include "hydra/fbp.hpp"
#include "hydra/vec.hpp"

namespace hydra {

SolverMethod parse_solver_method(const std::string& name) {
  if (name == "picard") return SolverMethod::picard;
  if (name == "anderson") return SolverMethod::anderson;
  throw ConfigError("unknown solver method '" + name + "'");
}

std::string to_string(SolverMethod m) { return m == SolverMethod::picard ? "picard" : "anderson"; }

InitKind parse_init_kind(const std::string& name) {
  if (name == "zero") return InitKind::zero;
  if (name == "fbp") return InitKind::fbp;
  throw ConfigError("unknown init kind '" + name + "'");
}

std::string to_string(InitKind k) { return k == InitKind::zero ? "zero" : "fbp"; }

void EquilibriumConfig::validate() const {
  if (!(tol > 0.0)) throw ConfigError("equilibrium.tol must be positive");
  if (max_iters < 1) throw ConfigError("equilibrium.max_iters must be >= 1");
  if (anderson_memory < 1) throw ConfigError("equilibrium.anderson_memory must be >= 1");
  if (!(anderson_ridge > 0.0)) throw ConfigError("equilibrium.anderson_ridge must be positive");
  if (!(anderson_relaxation > 0.0 && anderson_relaxation <= 1.0))
    throw ConfigError("equilibrium.anderson_relaxation must lie in (0, 1]");
}

nlohmann::json report_to_json(const SolveReport& r) {
  return {{"iterations", r.iterations},
          {"final_residual", r.final_residual},
          {"converged", r.converged},
          {"safeguard_steps", r.safeguard_steps},
          {"residual_history", r.residual_history}};
}

std::vector<double> anderson_step(const std::vector<std::vector<double>>& xs,
                                  const std::vector<std::vector<double>>& fs, int memory,
                                  double ridge, double relaxation, std::vector<double>* coefficients) {
  if (xs.empty() || xs.size() != fs.size()) throw DimensionError("anderson_step: bad history");
  const std::size_t k = std::min<std::size_t>(xs.size(), std::max(memory, 1));
  const std::size_t first = xs.size() - k;
  const std::size_t n = xs.back().size();

  std::vector<std::vector<double>> g(k, std::vector<double>(n));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i][j] = fs[first + i][j] - xs[first + i][j];

  Eigen::MatrixXd gram(k, k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) gram(a, b) = gram(b, a) = vec::dot(g[a], g[b]);

  Eigen::VectorXd alpha(k);
  const double trace = gram.trace();
  if (k == 1 || !(trace > 0.0)) {
    alpha.setZero();
    alpha(k - 1) = 1.0;
  } else {
    gram.diagonal().array() += ridge * trace;
    const Eigen::VectorXd z = gram.ldlt().solve(Eigen::VectorXd::Ones(k));
    alpha = z / z.sum();
  }
  if (coefficients) coefficients->assign(alpha.data(), alpha.data() + k);

  std::vector<double> next(n, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double a = alpha(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n; ++j)
      next[j] += a * (relaxation * fs[first + i][j] + (1.0 - relaxation) * xs[first + i][j]);
  }
  return next;
}

FixedPointResult solve_fixed_point(const FixedPointMap& f, std::vector<double> x0,
                                   const EquilibriumConfig& cfg) {
  cfg.validate();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const bool anderson = cfg.method == SolverMethod::anderson;
  FixedPointResult out;
  auto& rep = out.report;

  std::vector<double> x = std::move(x0);
  std::vector<double> fx(x.size());
  std::vector<std::vector<double>> hx, hf;
  double prev_residual = std::numeric_limits<double>::infinity();
  bool last_was_mixed = false;

  for (int k = 0; k < cfg.max_iters; ++k) {
    f(x, fx);
    if (!vec::all_finite(fx)) throw NumericalError("fixed-point iterate is not finite");
    const double r = vec::dist(fx, x) / std::max(vec::norm(x), eps);
    rep.residual_history.push_back(r);
    rep.iterations = k + 1;
    rep.final_residual = r;
    if (r <= cfg.tol) {
      rep.converged = true;
      out.x = fx;
      return out;
    }
    if (anderson && last_was_mixed && r > 10.0 * prev_residual && !hf.empty()) {
      // Reject the extrapolated point: Picard step from the last accepted pair.
      ++rep.safeguard_steps;
      x = hf.back();
      last_was_mixed = false;
      continue;
    }
    prev_residual = r;
    if (anderson) {
      hx.push_back(x);
      hf.push_back(fx);
      if (static_cast<int>(hx.size()) > cfg.anderson_memory) {
        hx.erase(hx.begin());
        hf.erase(hf.begin());
      }
      x = anderson_step(hx, hf, cfg.anderson_memory, cfg.anderson_ridge, cfg.anderson_relaxation);
      last_was_mixed = hx.size() > 1;
    } else {
      x.swap(fx);
    }
  }
  out.x = fx;
  return out;
}

std::pair<Image, SolveReport> solve_equilibrium(const DenoiserNet& net, const RadonOperator& op,
                                                const LayerConfig& layer,
                                                const EquilibriumConfig& cfg, const Sinogram& y) {
  layer.validate();
  const int n = op.image_size();
  Image x0(n);
  if (cfg.init == InitKind::fbp) {
    FbpConfig f;
    f.clamp = true;
    x0 = fbp(op, y, f);
  }
  const FixedPointMap map = [&](std::span<const double> in, std::span<double> fx) {
    Image xi(n);
    xi.data.assign(in.begin(), in.end());
    const Image r = layer_apply(net, op, layer, xi, y);
    std::copy(r.data.begin(), r.data.end(), fx.begin());
  };
  auto res = solve_fixed_point(map, std::move(x0.data), cfg);
  Image x(n);
  x.data = std::move(res.x);
  return {std::move(x), std::move(res.report)};
}

}  // namespace hydra
