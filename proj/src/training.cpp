#include "hydra/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "hydra/config.hpp"
#include "hydra/errors.hpp"
#include "hydra/metrics.hpp"
#include "hydra/tensor_io.hpp"
#include "hydra/util.hpp"

namespace fs = std::filesystem;

namespace hydra {
namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kOrderStream = 0x6f72646572ULL;
constexpr std::uint64_t kEpsStream = 0x657073ULL;
constexpr std::uint64_t kNormStream = 0x6e6f726dULL;
constexpr int kCheckpointVersion = 1;

Tensor flat_tensor(std::span<const double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.data.assign(v.begin(), v.end());
  t.dtype = DType::f64;
  return t;
}

std::vector<double> load_flat(const fs::path& p, std::size_t expected) {
  Tensor t = load_tensor(p);
  if (t.data.size() != expected)
    throw DataError("checkpoint tensor " + p.string() + " has the wrong size");
  return std::move(t.data);
}

json stopping_state_to_json(const StoppingState& s) {
  return json{{"best_metric", std::isfinite(s.best_metric) ? json(s.best_metric) : json(nullptr)},
              {"best_step", s.best_step},
              {"stale_evals", s.stale_evals},
              {"evaluations", s.evaluations},
              {"halted", s.halted}};
}

StoppingState stopping_state_from_json(const json& j) {
  StoppingState s;
  if (!j.at("best_metric").is_null()) s.best_metric = j.at("best_metric").get<double>();
  s.best_step = j.at("best_step").get<std::int64_t>();
  s.stale_evals = j.at("stale_evals").get<int>();
  s.evaluations = j.at("evaluations").get<int>();
  s.halted = j.at("halted").get<bool>();
  return s;
}

// Sample order: a fresh permutation of the train split per epoch.
class SampleOrder {
 public:
  SampleOrder(std::uint64_t seed, int n) : seed_(seed), n_(n) {}

  int at(std::int64_t counter) {
    const std::int64_t epoch = counter / n_;
    if (epoch != epoch_) {
      perm_.resize(n_);
      std::iota(perm_.begin(), perm_.end(), 0);
      std::mt19937_64 rng(stream_seed(seed_, kOrderStream, static_cast<std::uint64_t>(epoch)));
      std::shuffle(perm_.begin(), perm_.end(), rng);
      epoch_ = epoch;
    }
    return perm_[static_cast<std::size_t>(counter % n_)];
  }

 private:
  std::uint64_t seed_;
  int n_;
  std::int64_t epoch_ = -1;
  std::vector<int> perm_;
};

void write_best_marker(const fs::path& run_dir, std::int64_t step) {
  std::ofstream out(run_dir / "BEST", std::ios::trunc);
  out << checkpoint_dir(run_dir, step).filename().string() << "\n";
}

}  // namespace

void StoppingConfig::validate() const {
  if (eval_every < 1) throw ConfigError("stopping.eval_every must be at least 1");
  if (patience < 1) throw ConfigError("stopping.patience must be at least 1");
  if (val_subset_size < 0) throw ConfigError("stopping.val_subset_size must be nonnegative");
}

bool StoppingState::record(std::int64_t step, double metric, int patience) {
  ++evaluations;
  if (metric > best_metric) {
    best_metric = metric;
    best_step = step;
    stale_evals = 0;
    return true;
  }
  if (++stale_evals >= patience) halted = true;
  return false;
}

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size < 1) throw ConfigError("training.batch_size must be at least 1");
  if (max_steps < 1) throw ConfigError("training.max_steps must be at least 1");
  if (norm_iters < 1) throw ConfigError("training.norm_iters must be at least 1");
  stopping.validate();
  loss.validate();
  layer.validate();
  solver.validate();
  network.validate();
}

double auto_stop_metric(const DenoiserNet& net, const RadonOperator& op, const LayerConfig& layer,
                        const EquilibriumConfig& solver, const std::vector<Sinogram>& y_val,
                        int threads) {
  if (y_val.empty()) throw DataError("validation set is empty");
  std::vector<double> values(y_val.size());
  parallel_for(y_val.size(), threads, [&](std::size_t i) {
    const Image x = solve_equilibrium(net, op, layer, solver, y_val[i]).first;
    const Sinogram resim = radon_forward(op, x);
    const Image x2 = solve_equilibrium(net, op, layer, solver, resim).first;
    values[i] = psnr(x, x2);
  });
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

fs::path checkpoint_dir(const fs::path& run_dir, std::int64_t step) {
  return run_dir / ("ckpt_" + std::to_string(step));
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  const DenoiserNet& net = ckpt.net;
  json layers = json::array();
  for (int l = 0; l < net.n_layers(); ++l) {
    const auto& L = net.layer(l);
    const std::string stem = "layer" + std::to_string(l);
    Tensor w = flat_tensor(net.weight(l));
    w.shape = {static_cast<std::uint64_t>(L.out_ch), static_cast<std::uint64_t>(L.in_ch), 3, 3};
    save_tensor(dir / (stem + "_weight.tns"), w);
    save_tensor(dir / (stem + "_bias.tns"), flat_tensor(net.bias(l)));
    save_tensor(dir / (stem + "_power.tns"), flat_tensor(net.power_vector(l)));
    layers.push_back(json{{"in_channels", L.in_ch},
                          {"out_channels", L.out_ch},
                          {"sigma", net.sigma(l)},
                          {"weight", stem + "_weight.tns"},
                          {"bias", stem + "_bias.tns"},
                          {"power_vector", stem + "_power.tns"}});
  }
  json adam{{"step", ckpt.state.adam.step}};
  if (!ckpt.state.adam.m.empty()) {
    save_tensor(dir / "adam_m.tns", flat_tensor(ckpt.state.adam.m));
    save_tensor(dir / "adam_v.tns", flat_tensor(ckpt.state.adam.v));
    adam["m"] = "adam_m.tns";
    adam["v"] = "adam_v.tns";
  }
  const json index{{"format_version", kCheckpointVersion},
                   {"step", ckpt.state.step},
                   {"stop_metric", ckpt.stop_metric ? json(*ckpt.stop_metric) : json(nullptr)},
                   {"norm_sq", ckpt.norm_sq},
                   {"geometry", geometry_to_json(ckpt.geometry)},
                   {"config", to_json(ckpt.config)},
                   {"layers", layers},
                   {"adam", adam},
                   {"stopping", stopping_state_to_json(ckpt.state.stopping)}};
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint in " + dir.string());
  out << std::setprecision(17) << index.dump(2) << "\n";
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw DataError("no checkpoint index in " + dir.string());
  json j;
  try {
    in >> j;
    if (j.at("format_version").get<int>() != kCheckpointVersion)
      throw DataError("unsupported checkpoint version in " + dir.string());
    const TrainConfig cfg = train_config_from_json(j.at("config"));
    Checkpoint ckpt{DenoiserNet(cfg.network), {}, cfg, geometry_from_json(j.at("geometry")), 0.0, {}};
    ckpt.norm_sq = j.at("norm_sq").get<double>();
    if (!j.at("stop_metric").is_null()) ckpt.stop_metric = j.at("stop_metric").get<double>();
    ckpt.state.step = j.at("step").get<std::int64_t>();
    const auto& layers = j.at("layers");
    DenoiserNet& net = ckpt.net;
    if (static_cast<int>(layers.size()) != net.n_layers())
      throw DataError("checkpoint layer count does not match its network widths");
    for (int l = 0; l < net.n_layers(); ++l) {
      const auto& L = layers[static_cast<std::size_t>(l)];
      const auto w = load_flat(dir / L.at("weight").get<std::string>(), net.weight(l).size());
      const auto b = load_flat(dir / L.at("bias").get<std::string>(), net.bias(l).size());
      std::copy(w.begin(), w.end(), net.weight(l).begin());
      std::copy(b.begin(), b.end(), net.bias(l).begin());
      net.power_vector(l) = load_tensor(dir / L.at("power_vector").get<std::string>()).data;
      net.set_sigma(l, L.at("sigma").get<double>());
    }
    const auto& adam = j.at("adam");
    ckpt.state.adam.step = adam.at("step").get<std::int64_t>();
    if (adam.contains("m")) {
      ckpt.state.adam.m = load_flat(dir / adam.at("m").get<std::string>(), net.params().size());
      ckpt.state.adam.v = load_flat(dir / adam.at("v").get<std::string>(), net.params().size());
    }
    ckpt.state.stopping = stopping_state_from_json(j.at("stopping"));
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint index in " + dir.string() + ": " + e.what());
  }
}

std::vector<std::int64_t> list_checkpoints(const fs::path& run_dir) {
  std::vector<std::int64_t> steps;
  if (!fs::is_directory(run_dir)) return steps;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("ckpt_", 0) != 0) continue;
    if (!fs::exists(entry.path() / "index.json")) continue;
    try {
      std::size_t used = 0;
      const std::int64_t step = std::stoll(name.substr(5), &used);
      if (used == name.size() - 5) steps.push_back(step);
    } catch (const std::exception&) {
    }
  }
  std::sort(steps.begin(), steps.end());
  return steps;
}

std::optional<std::int64_t> best_checkpoint(const fs::path& run_dir) {
  std::ifstream in(run_dir / "BEST");
  std::string name;
  if (!in || !(in >> name) || name.rfind("ckpt_", 0) != 0) return std::nullopt;
  try {
    return std::stoll(name.substr(5));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const fs::path& out_dir,
                  const TrainOptions& options) {
  cfg.validate();
  const int n_train = data.count(Split::train);
  if (n_train < 1) throw DataError("training split is empty");
  int n_val = data.count(Split::val);
  if (cfg.stopping.val_subset_size > 0) n_val = std::min(n_val, cfg.stopping.val_subset_size);
  if (n_val < 1) throw DataError("validation split is empty");

  std::vector<Sinogram> train_y;
  for (int i = 0; i < n_train; ++i) train_y.push_back(data.noisy(Split::train, i));
  std::vector<Sinogram> val_y;
  for (int i = 0; i < n_val; ++i) val_y.push_back(data.noisy(Split::val, i));

  RadonOperator op = data.make_operator();
  std::optional<Checkpoint> resumed;
  if (options.resume) {
    resumed.emplace(load_checkpoint(*options.resume));
    if (!(resumed->geometry == op.geometry()))
      throw DataError("checkpoint geometry does not match the dataset");
    if (!(resumed->config.network == cfg.network))
      throw ConfigError("network widths differ from the checkpoint being resumed");
  }

  Checkpoint run{resumed ? resumed->net
                         : DenoiserNet::initialized(cfg.network, stream_seed(cfg.seed, kInitStream, 0)),
                 resumed ? resumed->state : TrainState{}, cfg, op.geometry(), 0.0, {}};
  if (resumed) {
    run.norm_sq = resumed->norm_sq;
    op.set_norm_sq(run.norm_sq);
  } else {
    run.norm_sq = estimate_operator_norm(op, cfg.norm_iters, stream_seed(cfg.seed, kNormStream, 0));
  }

  fs::create_directories(out_dir);
  if (resumed && run.state.stopping.best_step >= 0) {
    const fs::path src = checkpoint_dir(options.resume->parent_path(), run.state.stopping.best_step);
    const fs::path dst = checkpoint_dir(out_dir, run.state.stopping.best_step);
    if (fs::exists(src) && !fs::exists(dst)) fs::copy(src, dst, fs::copy_options::recursive);
    write_best_marker(out_dir, run.state.stopping.best_step);
  }
  {
    std::ofstream cfg_out(out_dir / "train_config.json", std::ios::trunc);
    cfg_out << to_json(cfg).dump(2) << "\n";
  }
  std::ofstream log(out_dir / "train_log.csv", std::ios::trunc);
  if (!log) throw DataError("cannot write " + (out_dir / "train_log.csv").string());
  log << "step,loss_dc,loss_reg,stop_metric_db,wallclock_s\n";
  log << std::setprecision(10);

  SampleOrder order(cfg.seed, n_train);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n_params = run.net.params().size();
  TrainResult result;

  while (run.state.step < cfg.max_steps && !run.state.stopping.halted) {
    const std::int64_t step = run.state.step + 1;
    std::vector<double> grad(n_params, 0.0);
    double dc = 0.0, reg = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::int64_t counter = (step - 1) * cfg.batch_size + b;
      const int sample = order.at(counter);
      LossAndGrad lg;
      try {
        lg = hybrid_loss_and_grad(run.net, op, cfg.layer, cfg.solver, cfg.loss, train_y[sample],
                                  stream_seed(cfg.seed, kEpsStream, static_cast<std::uint64_t>(counter)));
      } catch (const NumericalError& e) {
        const fs::path dump = out_dir / "abort_dump";
        save_checkpoint(dump, run);
        std::ofstream why(dump / "reason.json", std::ios::trunc);
        why << json{{"step", step}, {"train_sample", sample}, {"error", e.what()}}.dump(2) << "\n";
        throw NumericalError(std::string(e.what()) + " at step " + std::to_string(step) +
                             " (train sample " + std::to_string(sample) + "); state dumped to " +
                             dump.string());
      }
      dc += lg.loss.dc;
      reg += lg.loss.reg;
      for (std::size_t i = 0; i < n_params; ++i) grad[i] += lg.grad[i];
    }
    const double inv = 1.0 / cfg.batch_size;
    for (auto& g : grad) g *= inv;
    dc *= inv;
    reg *= inv;
    optimizer_step(run.net, run.state.adam, cfg.adam, grad);
    run.state.step = step;

    std::string metric_cell;
    run.stop_metric.reset();
    const bool eval_now = step % cfg.stopping.eval_every == 0;
    if (eval_now) {
      const double metric = auto_stop_metric(run.net, op, cfg.layer, cfg.solver, val_y, options.threads);
      run.stop_metric = metric;
      const bool improved = run.state.stopping.record(step, metric, cfg.stopping.patience);
      std::ostringstream cell;
      cell << std::setprecision(10) << metric;
      metric_cell = cell.str();
      save_checkpoint(checkpoint_dir(out_dir, step), run);
      if (improved) write_best_marker(out_dir, step);
      if (options.progress)
        *options.progress << "step " << step << "  stop metric " << std::fixed << std::setprecision(3)
                          << metric << " dB" << (improved ? "  (best)" : "") << std::defaultfloat
                          << "\n";
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << step << ',' << dc << ',' << reg << ',' << metric_cell << ',' << wall << '\n';
    if (!eval_now && (step == cfg.max_steps)) save_checkpoint(checkpoint_dir(out_dir, step), run);
  }
  log.flush();

  result.final_step = run.state.step;
  result.best_step = run.state.stopping.best_step;
  result.best_metric = run.state.stopping.best_metric;
  result.halted = run.state.stopping.halted;
  return result;
}

}  // namespace hydra
