#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hydra/dataset.hpp"
#include "hydra/fbp.hpp"
#include "hydra/fixed_point.hpp"
#include "hydra/pgd.hpp"
#include "hydra/training.hpp"

namespace hydra {

/// Method names in report order.
const std::vector<std::string>& all_methods();

struct EvalConfig {
  std::vector<std::string> methods = all_methods();
  FbpConfig fbp = [] {
    FbpConfig c;
    c.clamp = true;
    return c;
  }();
  TvConfig tv;
  bool tv_grid_search = true;
  int tv_grid_samples = 8;    ///< validation samples for the alpha search
  int oracle_val_samples = 8; ///< validation samples ranking checkpoints for hydra-max
  int max_test_samples = 0;   ///< 0: the whole test split
  bool save_images = true;
  EquilibriumConfig solver = [] {
    EquilibriumConfig c;
    c.init = InitKind::fbp;
    return c;
  }();

  void validate() const;
  bool operator==(const EvalConfig&) const = default;
};

/// One dataset (one view count) plus the training runs evaluated on it,
/// keyed by loss mode name ("hydra", "plain", "tv").
struct EvalInput {
  const Dataset* data = nullptr;
  std::map<std::string, std::filesystem::path> runs;
};

struct SampleResult {
  std::string method;
  int n_views = 0;
  int sample_id = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double time_s = 0.0;
  int solver_iterations = 0;  ///< 0 for non-equilibrium methods
  bool converged = true;
};

struct MetricsRow {
  std::string method;
  int n_views = 0;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
  double mean_time_s = 0.0;
  int count = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<SampleResult> samples;
  std::vector<std::string> skipped;                       ///< "method@views: reason"
  std::map<std::string, std::string> selections;          ///< "method@views" -> chosen alpha / step

  const MetricsRow* find(const std::string& method, int n_views) const;
};

/// Equilibrium reconstruction with a trained checkpoint; the layer settings
/// and ||A||^2 come from the checkpoint, the solver settings from `solver`.
Image reconstruct_equilibrium(const Checkpoint& ckpt, const Sinogram& y,
                              const EquilibriumConfig& solver, SolveReport* report = nullptr);

struct OraclePoint {
  std::int64_t step = 0;
  double val_psnr_db = 0.0;          ///< mean PSNR against validation phantoms
  std::optional<double> stop_metric; ///< measurement-only metric logged during training
};

/// Scores every checkpoint of a run against validation phantoms.
std::vector<OraclePoint> oracle_curve(const std::filesystem::path& run_dir, const Dataset& data,
                                      const EvalConfig& cfg, int threads = 1);

/// Reconstructs the test split with every configured method. Writes
/// results.csv, summary.txt, and (if enabled) recon/<method>/v<views>/
/// sample_XXXXX.{tns,png} under out_dir.
MetricsReport evaluate(const std::vector<EvalInput>& inputs, const EvalConfig& cfg,
                       const std::filesystem::path& out_dir, int threads = 1,
                       std::ostream* log = nullptr);

std::string format_summary(const MetricsReport& report);
void write_results_csv(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace hydra
