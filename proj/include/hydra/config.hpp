#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydra/evaluate.hpp"
#include "hydra/phantom.hpp"
#include "hydra/training.hpp"

namespace hydra {

using nlohmann::json;

// JSON forms of the component settings. Parsers reject unknown keys and fill
// omitted keys from the defaults.
json to_json(const FbpConfig& c);
json to_json(const TvConfig& c);
json to_json(const DenoiserOptions& c);
json to_json(const LayerConfig& c);
json to_json(const EquilibriumConfig& c);
json to_json(const LossConfig& c);
json to_json(const AdamConfig& c);
json to_json(const StoppingConfig& c);
json to_json(const TrainConfig& c);
json to_json(const EvalConfig& c);
json to_json(const PhantomConfig& c);

FbpConfig fbp_config_from_json(const json& j);
TvConfig tv_config_from_json(const json& j);
DenoiserOptions denoiser_options_from_json(const json& j);
LayerConfig layer_config_from_json(const json& j);
EquilibriumConfig equilibrium_config_from_json(const json& j);
LossConfig loss_config_from_json(const json& j);
AdamConfig adam_config_from_json(const json& j);
StoppingConfig stopping_config_from_json(const json& j);
TrainConfig train_config_from_json(const json& j);
EvalConfig eval_config_from_json(const json& j);
PhantomConfig phantom_config_from_json(const json& j);

struct GeometryConfig {
  int image_size = 64;
  int n_full_angles = 192;
  std::vector<int> views = {16, 32, 64};
  int n_detectors = 0;  ///< 0: image_size
  double detector_spacing = 1.0;  ///< in pixels
  double field_of_view = 4.0;     ///< physical width of the image; pixel size is this / image_size

  double pixel_size() const { return field_of_view / image_size; }
  void validate() const;
  bool operator==(const GeometryConfig&) const = default;
};

struct DataConfig {
  int n_samples = 200;
  int train = 0;  ///< split sizes; all zero: 70/15/15 of n_samples
  int val = 0;
  int test = 0;
  double photons_per_bin = 1000.0;
  std::string slices_dir;  ///< optional directory of prepared slices used instead of phantoms
  PhantomConfig phantom;   ///< size and seed are taken from the geometry and the run seed

  SplitSizes split_sizes() const;
  void validate() const;
  bool operator==(const DataConfig&) const = default;
};

/// Every setting of a run. The training and evaluation sections share the
/// run seed.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir;
  GeometryConfig geometry;
  DataConfig data;
  TrainConfig training;
  EvalConfig evaluation;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

json to_json(const GeometryConfig& c);
json to_json(const DataConfig& c);
json to_json(const RunConfig& c);
GeometryConfig geometry_config_from_json(const json& j);
DataConfig data_config_from_json(const json& j);
RunConfig run_config_from_json(const json& j);

RunConfig load_run_config(const std::filesystem::path& path);
/// Writes the effective configuration as config_effective.json in `dir`.
void echo_run_config(const RunConfig& cfg, const std::filesystem::path& dir);

/// Dataset plan for one view count.
DatasetManifest dataset_plan(const RunConfig& cfg, int n_views);

}  // namespace hydra
