#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "hydra/adam.hpp"
#include "hydra/dataset.hpp"
#include "hydra/denoiser.hpp"
#include "hydra/fixed_point.hpp"
#include "hydra/layer.hpp"
#include "hydra/loss.hpp"

namespace hydra {

struct StoppingConfig {
  int eval_every = 1000;    ///< steps between validation evaluations
  int patience = 10;        ///< evaluations without improvement before halting
  int val_subset_size = 8;  ///< validation measurements used by the metric (0: all)

  void validate() const;
  bool operator==(const StoppingConfig&) const = default;
};

struct StoppingState {
  double best_metric = -std::numeric_limits<double>::infinity();
  std::int64_t best_step = -1;
  int stale_evals = 0;
  int evaluations = 0;
  bool halted = false;

  /// Records one evaluation; returns true on a strict improvement. Halts once
  /// `patience` consecutive evaluations fail to improve.
  bool record(std::int64_t step, double metric, int patience);
  bool operator==(const StoppingState&) const = default;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  AdamConfig adam;
  int batch_size = 1;
  std::int64_t max_steps = 20000;
  int norm_iters = 100;  ///< power iterations for ||A||^2
  StoppingConfig stopping;
  LossConfig loss;
  LayerConfig layer;
  EquilibriumConfig solver;
  DenoiserOptions network;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainState {
  std::int64_t step = 0;
  AdamState adam;
  StoppingState stopping;

  bool operator==(const TrainState&) const = default;
};

/// Mean over the measurements of PSNR(B(y), B(A B(y))), range 1.
double auto_stop_metric(const DenoiserNet& net, const RadonOperator& op, const LayerConfig& layer,
                        const EquilibriumConfig& solver, const std::vector<Sinogram>& y_val,
                        int threads = 1);

/// Everything needed to run inference or continue training.
struct Checkpoint {
  DenoiserNet net;
  TrainState state;
  TrainConfig config;
  Geometry geometry;
  double norm_sq = 0.0;
  std::optional<double> stop_metric;  ///< metric measured at this step, if any
};

std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, std::int64_t step);
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Steps of all ckpt_<step> directories in the run, ascending.
std::vector<std::int64_t> list_checkpoints(const std::filesystem::path& run_dir);
/// Step named by the run's BEST marker, if present.
std::optional<std::int64_t> best_checkpoint(const std::filesystem::path& run_dir);

struct TrainOptions {
  std::optional<std::filesystem::path> resume;  ///< checkpoint directory to continue from
  int threads = 1;
  std::ostream* progress = nullptr;
};

struct TrainResult {
  std::int64_t final_step = 0;
  std::int64_t best_step = -1;
  double best_metric = 0.0;
  bool halted = false;  ///< stopped by patience rather than the step cap
};

/// Trains on the train split, monitoring the validation measurements.
/// Writes train_log.csv, ckpt_<step>/ at every evaluation and at the last
/// step, and BEST naming the best-metric checkpoint.
TrainResult train(const Dataset& data, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

}  // namespace hydra
