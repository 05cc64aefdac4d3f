#include "hydra/config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

#include "hydra/errors.hpp"

namespace fs = std::filesystem;

namespace hydra {
namespace {

// Reads the keys of one JSON object, remembering which ones were consumed so
// leftovers can be reported.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!type_ok<T>(*it)) throw ConfigError(path(key) + " has the wrong type");
    out = it->template get<T>();
  }

  template <class F>
  void with(const char* key, F&& parse) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      parse(*it, path(key));
    } catch (const json::exception&) {
      throw ConfigError(path(key) + " has the wrong type");
    }
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown config key " + path(item.key()));
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

 private:
  template <class T>
  static bool type_ok(const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      return v.is_boolean();
    } else if constexpr (std::is_unsigned_v<T>) {
      return v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
      return v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      return v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v.is_string();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_number_integer()) return false;
      return true;
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_number()) return false;
      return true;
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_string()) return false;
      return true;
    } else {
      return true;
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + " must be a string");
  return v.get<std::string>();
}

}  // namespace

json to_json(const FbpConfig& c) {
  return json{{"filter", to_string(c.filter)}, {"cutoff", c.cutoff}, {"clamp", c.clamp}};
}

FbpConfig fbp_config_from_json(const json& j) {
  FbpConfig c;
  Fields f(j, "fbp");
  f.with("filter", [&](const json& v, const std::string& w) { c.filter = parse_filter_kind(as_string(v, w)); });
  f.get("cutoff", c.cutoff);
  f.get("clamp", c.clamp);
  f.finish();
  if (!(c.cutoff > 0.0 && c.cutoff <= 1.0)) throw ConfigError("fbp.cutoff must be in (0, 1]");
  return c;
}

json to_json(const TvConfig& c) {
  return json{{"alpha", c.alpha},           {"variant", to_string(c.variant)},
              {"inner_iters", c.inner_iters}, {"pgd_iters", c.pgd_iters},
              {"step_scale", c.step_scale},   {"alpha_grid", c.alpha_grid}};
}

TvConfig tv_config_from_json(const json& j) {
  TvConfig c;
  Fields f(j, "tv");
  f.get("alpha", c.alpha);
  f.with("variant", [&](const json& v, const std::string& w) { c.variant = parse_tv_variant(as_string(v, w)); });
  f.get("inner_iters", c.inner_iters);
  f.get("pgd_iters", c.pgd_iters);
  f.get("step_scale", c.step_scale);
  f.get("alpha_grid", c.alpha_grid);
  f.finish();
  c.validate();
  return c;
}

json to_json(const DenoiserOptions& c) {
  return json{{"widths", c.widths},
              {"lipschitz_budget", c.lipschitz_budget},
              {"leaky_slope", c.leaky_slope},
              {"spectral_size", c.spectral_size},
              {"skip", c.skip}};
}

DenoiserOptions denoiser_options_from_json(const json& j) {
  DenoiserOptions c;
  Fields f(j, "network");
  f.get("widths", c.widths);
  f.get("lipschitz_budget", c.lipschitz_budget);
  f.get("leaky_slope", c.leaky_slope);
  f.get("spectral_size", c.spectral_size);
  f.get("skip", c.skip);
  f.finish();
  c.validate();
  return c;
}

json to_json(const LayerConfig& c) {
  return json{{"lambda", c.lambda}, {"omega", to_string(c.omega)}, {"step_scale", c.step_scale}};
}

LayerConfig layer_config_from_json(const json& j) {
  LayerConfig c;
  Fields f(j, "layer");
  f.get("lambda", c.lambda);
  f.with("omega", [&](const json& v, const std::string& w) { c.omega = parse_omega(as_string(v, w)); });
  f.get("step_scale", c.step_scale);
  f.finish();
  c.validate();
  return c;
}

json to_json(const EquilibriumConfig& c) {
  return json{{"tol", c.tol},
              {"max_iters", c.max_iters},
              {"method", to_string(c.method)},
              {"anderson_memory", c.anderson_memory},
              {"anderson_ridge", c.anderson_ridge},
              {"anderson_relaxation", c.anderson_relaxation},
              {"init", to_string(c.init)}};
}

EquilibriumConfig equilibrium_config_from_json(const json& j) {
  EquilibriumConfig c;
  Fields f(j, "solver");
  f.get("tol", c.tol);
  f.get("max_iters", c.max_iters);
  f.with("method", [&](const json& v, const std::string& w) { c.method = parse_solver_method(as_string(v, w)); });
  f.get("anderson_memory", c.anderson_memory);
  f.get("anderson_ridge", c.anderson_ridge);
  f.get("anderson_relaxation", c.anderson_relaxation);
  f.with("init", [&](const json& v, const std::string& w) { c.init = parse_init_kind(as_string(v, w)); });
  f.finish();
  c.validate();
  return c;
}

json to_json(const LossConfig& c) {
  return json{{"mode", to_string(c.mode)},
              {"gamma", c.gamma ? json(*c.gamma) : json(nullptr)},
              {"noise_sigma", c.noise_sigma},
              {"tv_alpha", c.tv_alpha},
              {"tv_variant", to_string(c.tv_variant)}};
}

LossConfig loss_config_from_json(const json& j) {
  LossConfig c;
  Fields f(j, "loss");
  f.with("mode", [&](const json& v, const std::string& w) { c.mode = parse_loss_mode(as_string(v, w)); });
  f.with("gamma", [&](const json& v, const std::string& w) {
    if (v.is_null()) {
      c.gamma.reset();
    } else if (v.is_number()) {
      c.gamma = v.get<double>();
    } else {
      throw ConfigError(w + " must be a number or null");
    }
  });
  f.get("noise_sigma", c.noise_sigma);
  f.get("tv_alpha", c.tv_alpha);
  f.with("tv_variant", [&](const json& v, const std::string& w) { c.tv_variant = parse_tv_variant(as_string(v, w)); });
  f.finish();
  c.validate();
  return c;
}

json to_json(const AdamConfig& c) {
  return json{{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

AdamConfig adam_config_from_json(const json& j) {
  AdamConfig c;
  Fields f(j, "adam");
  f.get("lr", c.lr);
  f.get("beta1", c.beta1);
  f.get("beta2", c.beta2);
  f.get("eps", c.eps);
  f.finish();
  c.validate();
  return c;
}

json to_json(const StoppingConfig& c) {
  return json{{"eval_every", c.eval_every},
              {"patience", c.patience},
              {"val_subset_size", c.val_subset_size}};
}

StoppingConfig stopping_config_from_json(const json& j) {
  StoppingConfig c;
  Fields f(j, "stopping");
  f.get("eval_every", c.eval_every);
  f.get("patience", c.patience);
  f.get("val_subset_size", c.val_subset_size);
  f.finish();
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"seed", c.seed},
              {"adam", to_json(c.adam)},
              {"batch_size", c.batch_size},
              {"max_steps", c.max_steps},
              {"norm_iters", c.norm_iters},
              {"stopping", to_json(c.stopping)},
              {"loss", to_json(c.loss)},
              {"layer", to_json(c.layer)},
              {"solver", to_json(c.solver)},
              {"network", to_json(c.network)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Fields f(j, "training");
  f.get("seed", c.seed);
  f.with("adam", [&](const json& v, const std::string&) { c.adam = adam_config_from_json(v); });
  f.get("batch_size", c.batch_size);
  f.get("max_steps", c.max_steps);
  f.get("norm_iters", c.norm_iters);
  f.with("stopping", [&](const json& v, const std::string&) { c.stopping = stopping_config_from_json(v); });
  f.with("loss", [&](const json& v, const std::string&) { c.loss = loss_config_from_json(v); });
  f.with("layer", [&](const json& v, const std::string&) { c.layer = layer_config_from_json(v); });
  f.with("solver", [&](const json& v, const std::string&) { c.solver = equilibrium_config_from_json(v); });
  f.with("network", [&](const json& v, const std::string&) { c.network = denoiser_options_from_json(v); });
  f.finish();
  c.validate();
  return c;
}

json to_json(const EvalConfig& c) {
  return json{{"methods", c.methods},
              {"fbp", to_json(c.fbp)},
              {"tv", to_json(c.tv)},
              {"tv_grid_search", c.tv_grid_search},
              {"tv_grid_samples", c.tv_grid_samples},
              {"oracle_val_samples", c.oracle_val_samples},
              {"max_test_samples", c.max_test_samples},
              {"save_images", c.save_images},
              {"solver", to_json(c.solver)}};
}

EvalConfig eval_config_from_json(const json& j) {
  EvalConfig c;
  Fields f(j, "evaluation");
  f.get("methods", c.methods);
  f.with("fbp", [&](const json& v, const std::string&) { c.fbp = fbp_config_from_json(v); });
  f.with("tv", [&](const json& v, const std::string&) { c.tv = tv_config_from_json(v); });
  f.get("tv_grid_search", c.tv_grid_search);
  f.get("tv_grid_samples", c.tv_grid_samples);
  f.get("oracle_val_samples", c.oracle_val_samples);
  f.get("max_test_samples", c.max_test_samples);
  f.get("save_images", c.save_images);
  f.with("solver", [&](const json& v, const std::string&) { c.solver = equilibrium_config_from_json(v); });
  f.finish();
  c.validate();
  return c;
}

json to_json(const PhantomConfig& c) {
  return json{{"size", c.size},
              {"min_ellipses", c.min_ellipses},
              {"max_ellipses", c.max_ellipses},
              {"min_intensity", c.min_intensity},
              {"max_intensity", c.max_intensity},
              {"seed", c.seed}};
}

PhantomConfig phantom_config_from_json(const json& j) {
  PhantomConfig c;
  Fields f(j, "phantom");
  f.get("size", c.size);
  f.get("min_ellipses", c.min_ellipses);
  f.get("max_ellipses", c.max_ellipses);
  f.get("min_intensity", c.min_intensity);
  f.get("max_intensity", c.max_intensity);
  f.get("seed", c.seed);
  f.finish();
  return c;
}

void GeometryConfig::validate() const {
  if (image_size < 4) throw ConfigError("geometry.image_size must be at least 4");
  if (n_full_angles < 1) throw ConfigError("geometry.n_full_angles must be positive");
  if (views.empty()) throw ConfigError("geometry.views must not be empty");
  for (int v : views)
    if (v < 1 || v > n_full_angles)
      throw ConfigError("geometry.views entries must lie in [1, n_full_angles]");
  if (n_detectors < 0) throw ConfigError("geometry.n_detectors must be nonnegative");
  if (!(detector_spacing > 0.0)) throw ConfigError("geometry.detector_spacing must be positive");
  if (!(field_of_view > 0.0)) throw ConfigError("geometry.field_of_view must be positive");
}

SplitSizes DataConfig::split_sizes() const {
  if (train == 0 && val == 0 && test == 0) return SplitSizes::from_ratio(n_samples);
  return SplitSizes{train, val, test};
}

void DataConfig::validate() const {
  if (n_samples < 3) throw ConfigError("data.n_samples must be at least 3");
  if (train < 0 || val < 0 || test < 0) throw ConfigError("data split sizes must be nonnegative");
  if (train + val + test != 0 && train + val + test != n_samples)
    throw ConfigError("data split sizes must sum to data.n_samples");
  const auto s = split_sizes();
  if (s.train < 1 || s.val < 1 || s.test < 1) throw ConfigError("every data split needs a sample");
  if (!(photons_per_bin >= 1.0)) throw ConfigError("data.photons_per_bin must be at least 1");
  if (phantom.min_ellipses < 1 || phantom.max_ellipses < phantom.min_ellipses)
    throw ConfigError("data.phantom ellipse counts are inconsistent");
  if (!(phantom.min_intensity <= phantom.max_intensity))
    throw ConfigError("data.phantom intensity range is empty");
}

void RunConfig::validate() const {
  geometry.validate();
  data.validate();
  training.validate();
  evaluation.validate();
}

json to_json(const GeometryConfig& c) {
  return json{{"image_size", c.image_size},   {"n_full_angles", c.n_full_angles},
              {"views", c.views},             {"n_detectors", c.n_detectors},
              {"detector_spacing", c.detector_spacing}, {"field_of_view", c.field_of_view}};
}

GeometryConfig geometry_config_from_json(const json& j) {
  GeometryConfig c;
  Fields f(j, "geometry");
  f.get("image_size", c.image_size);
  f.get("n_full_angles", c.n_full_angles);
  f.get("views", c.views);
  f.get("n_detectors", c.n_detectors);
  f.get("detector_spacing", c.detector_spacing);
  f.get("field_of_view", c.field_of_view);
  f.finish();
  c.validate();
  return c;
}

json to_json(const DataConfig& c) {
  return json{{"n_samples", c.n_samples},
              {"train", c.train},
              {"val", c.val},
              {"test", c.test},
              {"photons_per_bin", c.photons_per_bin},
              {"slices_dir", c.slices_dir},
              {"phantom",
               {{"min_ellipses", c.phantom.min_ellipses},
                {"max_ellipses", c.phantom.max_ellipses},
                {"min_intensity", c.phantom.min_intensity},
                {"max_intensity", c.phantom.max_intensity}}}};
}

DataConfig data_config_from_json(const json& j) {
  DataConfig c;
  Fields f(j, "data");
  f.get("n_samples", c.n_samples);
  f.get("train", c.train);
  f.get("val", c.val);
  f.get("test", c.test);
  f.get("photons_per_bin", c.photons_per_bin);
  f.get("slices_dir", c.slices_dir);
  f.with("phantom", [&](const json& v, const std::string& w) {
    Fields p(v, w);
    p.get("min_ellipses", c.phantom.min_ellipses);
    p.get("max_ellipses", c.phantom.max_ellipses);
    p.get("min_intensity", c.phantom.min_intensity);
    p.get("max_intensity", c.phantom.max_intensity);
    p.finish();
  });
  f.finish();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json t = to_json(c.training);
  t.erase("seed");
  return json{{"seed", c.seed},
              {"out_dir", c.out_dir},
              {"geometry", to_json(c.geometry)},
              {"data", to_json(c.data)},
              {"training", t},
              {"evaluation", to_json(c.evaluation)}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Fields f(j, "config");
  f.get("seed", c.seed);
  f.get("out_dir", c.out_dir);
  f.with("geometry", [&](const json& v, const std::string&) { c.geometry = geometry_config_from_json(v); });
  f.with("data", [&](const json& v, const std::string&) { c.data = data_config_from_json(v); });
  f.with("training", [&](const json& v, const std::string& w) {
    if (v.is_object() && v.contains("seed")) throw ConfigError("unknown config key " + w + ".seed");
    c.training = train_config_from_json(v);
  });
  f.with("evaluation", [&](const json& v, const std::string&) { c.evaluation = eval_config_from_json(v); });
  f.finish();
  c.training.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config file " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void echo_run_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config_effective.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "config_effective.json").string());
  out << to_json(cfg).dump(2) << "\n";
}

DatasetManifest dataset_plan(const RunConfig& cfg, int n_views) {
  const auto& g = cfg.geometry;
  DatasetManifest m;
  m.seed = cfg.seed;
  m.geometry.image_size = g.image_size;
  m.geometry.n_detectors = g.n_detectors > 0 ? g.n_detectors : g.image_size;
  m.geometry.detector_spacing = g.detector_spacing;
  m.geometry.pixel_size = g.pixel_size();
  m.geometry.angles = equispaced_angles(g.n_full_angles);
  m.geometry.mask = uniform_view_mask(g.n_full_angles, n_views);
  m.photons_per_bin = cfg.data.photons_per_bin;
  m.splits = cfg.data.split_sizes();
  m.phantom = cfg.data.phantom;
  m.phantom.size = g.image_size;
  m.phantom.seed = cfg.seed;
  m.slices_dir = cfg.data.slices_dir;
  return m;
}

}  // namespace hydra
