#include "hydra/pgd.hpp"

#include <algorithm>
#include <iostream>

#include "hydra/errors.hpp"
#include "hydra/metrics.hpp"
#include "hydra/util.hpp"

namespace hydra {

void TvConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("tv.alpha must be positive");
  if (inner_iters < 1) throw ConfigError("tv.inner_iters must be >= 1");
  if (pgd_iters < 0) throw ConfigError("tv.pgd_iters must be >= 0");
  if (!(step_scale > 0.0 && step_scale <= 1.0)) throw ConfigError("tv.step_scale must lie in (0, 1]");
}

double tv_objective(const RadonOperator& op, const Image& x, const Sinogram& y, double alpha,
                    TvVariant variant) {
  const Sinogram ax = radon_forward(op, x);
  double r = 0.0;
  for (std::size_t i = 0; i < ax.numel(); ++i) {
    const double d = ax.data[i] - y.data[i];
    r += d * d;
  }
  return r + alpha * tv_value(x, variant);
}

Image pgd_reconstruct(const RadonOperator& op, const Sinogram& y, const TvConfig& cfg,
                      const PgdOptions& opts) {
  cfg.validate();
  const double s = cfg.step_scale / op.require_norm_sq();
  Image x;
  if (opts.init) {
    x = *opts.init;
  } else {
    FbpConfig f;
    f.clamp = true;
    x = fbp(op, y, f);
  }
  if (x.size != op.image_size()) throw DimensionError("pgd: initial image size mismatch");
  TvDualState dual;
  Sinogram residual(op.n_angles(), op.n_detectors());
  Image back(op.image_size());
  for (int k = 0; k < cfg.pgd_iters; ++k) {
    op.forward<double>(x.span(), residual.span());
    for (std::size_t i = 0; i < residual.numel(); ++i) residual.data[i] -= y.data[i];
    op.adjoint<double>(residual.span(), back.span());
    for (std::size_t i = 0; i < x.numel(); ++i) x.data[i] -= 2.0 * s * back.data[i];
    x = tv_prox(x, s * cfg.alpha, cfg.inner_iters, cfg.variant, &dual);
    if (opts.objective_trace)
      opts.objective_trace->push_back(tv_objective(op, x, y, cfg.alpha, cfg.variant));
  }
  if (opts.clamp_output)
    for (auto& v : x.data) v = std::clamp(v, 0.0, 1.0);
  return x;
}

GridSearchResult grid_search_alpha(const RadonOperator& op, const std::vector<Sinogram>& sinograms,
                                   const std::vector<Image>& phantoms, const TvConfig& cfg,
                                   int threads) {
  if (cfg.alpha_grid.empty()) throw ConfigError("alpha grid is empty");
  if (sinograms.size() != phantoms.size() || sinograms.empty())
    throw DataError("grid search needs matching, non-empty sinogram and phantom lists");
  GridSearchResult res;
  res.alphas = cfg.alpha_grid;
  std::sort(res.alphas.begin(), res.alphas.end());
  res.alphas.erase(std::unique(res.alphas.begin(), res.alphas.end()), res.alphas.end());
  res.mean_psnr.assign(res.alphas.size(), 0.0);

  const std::size_t n = sinograms.size();
  std::vector<double> scores(res.alphas.size() * n);
  parallel_for(scores.size(), threads, [&](std::size_t job) {
    const std::size_t a = job / n;
    const std::size_t i = job % n;
    TvConfig c = cfg;
    c.alpha = res.alphas[a];
    scores[job] = psnr(pgd_reconstruct(op, sinograms[i], c), phantoms[i]);
  });
  for (std::size_t a = 0; a < res.alphas.size(); ++a) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += scores[a * n + i];
    res.mean_psnr[a] = m / static_cast<double>(n);
  }
  std::size_t best = 0;
  for (std::size_t a = 1; a < res.alphas.size(); ++a)
    if (res.mean_psnr[a] >= res.mean_psnr[best]) best = a;  // ties toward larger alpha
  res.best_alpha = res.alphas[best];
  res.endpoint = res.alphas.size() > 2 && (best == 0 || best + 1 == res.alphas.size());
  if (res.endpoint)
    std::cerr << "warning: TV grid search selected endpoint alpha=" << res.best_alpha
              << "; consider widening the grid\n";
  return res;
}

}  // namespace hydra
