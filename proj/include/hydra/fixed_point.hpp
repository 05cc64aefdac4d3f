#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hydra/denoiser.hpp"
#include "hydra/layer.hpp"

namespace hydra {

enum class SolverMethod { picard, anderson };
enum class InitKind { zero, fbp };

SolverMethod parse_solver_method(const std::string& name);
std::string to_string(SolverMethod m);
InitKind parse_init_kind(const std::string& name);
std::string to_string(InitKind k);

struct EquilibriumConfig {
  double tol = 1e-3;  ///< on ||f(x) - x|| / max(||x||, eps)
  int max_iters = 50;
  SolverMethod method = SolverMethod::anderson;
  int anderson_memory = 5;
  double anderson_ridge = 1e-4;  ///< relative to the trace of the Gram matrix
  double anderson_relaxation = 1.0;
  InitKind init = InitKind::zero;

  void validate() const;
  bool operator==(const EquilibriumConfig&) const = default;
};

struct SolveReport {
  int iterations = 0;  ///< evaluations of the fixed-point map
  double final_residual = 0.0;
  bool converged = false;
  int safeguard_steps = 0;  ///< Anderson steps replaced by Picard steps
  std::vector<double> residual_history;
};

nlohmann::json report_to_json(const SolveReport& r);

using FixedPointMap = std::function<void(std::span<const double> x, std::span<double> fx)>;

/// Mixing step of type-II Anderson acceleration over the last min(m, k)
/// pairs (x_i, f(x_i)). Coefficients minimize ||sum a_i (f_i - x_i)|| subject
/// to sum a_i = 1, through ridge-regularized normal equations. Returns
/// beta * sum a_i f_i + (1 - beta) * sum a_i x_i.
std::vector<double> anderson_step(const std::vector<std::vector<double>>& xs,
                                  const std::vector<std::vector<double>>& fs, int memory,
                                  double ridge, double relaxation,
                                  std::vector<double>* coefficients = nullptr);

struct FixedPointResult {
  std::vector<double> x;
  SolveReport report;
};

/// Iterates until the relative residual drops to tol or max_iters maps have
/// been evaluated. On convergence the returned point is f(x_k). An Anderson
/// step whose residual grows more than tenfold is replaced by a Picard step.
/// Throws NumericalError on a non-finite iterate.
FixedPointResult solve_fixed_point(const FixedPointMap& f, std::vector<double> x0,
                                   const EquilibriumConfig& cfg);

/// Reconstruction B(y): the fixed point of layer_apply(net, op, layer, ., y).
std::pair<Image, SolveReport> solve_equilibrium(const DenoiserNet& net, const RadonOperator& op,
                                                const LayerConfig& layer,
                                                const EquilibriumConfig& cfg, const Sinogram& y);

}  // namespace hydra
