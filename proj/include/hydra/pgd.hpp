#pragma once

#include <vector>

#include "hydra/fbp.hpp"
#include "hydra/image.hpp"
#include "hydra/radon.hpp"
#include "hydra/tv.hpp"

namespace hydra {

/// Variational TV reconstruction settings. The step is s = step_scale / ||A||^2.
struct TvConfig {
  double alpha = 1e-2;
  TvVariant variant = TvVariant::isotropic;
  int inner_iters = 20;
  int pgd_iters = 300;
  double step_scale = 0.9;  ///< in (0, 1]
  std::vector<double> alpha_grid = {1e-4, 1e-3, 1e-2, 1e-1};

  void validate() const;
  bool operator==(const TvConfig&) const = default;
};

/// ||A x - y||^2 + alpha * TV(x)
double tv_objective(const RadonOperator& op, const Image& x, const Sinogram& y, double alpha,
                    TvVariant variant);

struct PgdOptions {
  const Image* init = nullptr;  ///< default: clamped ram-lak FBP
  bool clamp_output = true;
  std::vector<double>* objective_trace = nullptr;  ///< objective after every iteration
};

/// Proximal gradient descent x <- prox_{s alpha TV}(x - 2 s A^T (A x - y)).
Image pgd_reconstruct(const RadonOperator& op, const Sinogram& y, const TvConfig& cfg,
                      const PgdOptions& opts = {});

struct GridSearchResult {
  double best_alpha = 0.0;
  std::vector<double> alphas;     ///< deduplicated, ascending
  std::vector<double> mean_psnr;  ///< per alpha
  bool endpoint = false;          ///< winner at either end of a grid with > 2 entries
};

/// Picks the alpha maximizing mean PSNR against ground truth; ties go to the
/// larger alpha. Uses phantoms, so it is an oracle-tuned baseline.
GridSearchResult grid_search_alpha(const RadonOperator& op, const std::vector<Sinogram>& sinograms,
                                   const std::vector<Image>& phantoms, const TvConfig& cfg,
                                   int threads = 1);

}  // namespace hydra
