#include "hydra/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hydra/config.hpp"
#include "hydra/errors.hpp"
#include "hydra/metrics.hpp"
#include "hydra/png.hpp"
#include "hydra/tensor_io.hpp"
#include "hydra/util.hpp"

namespace fs = std::filesystem;

namespace hydra {
namespace {

// Images smaller than the standard window are scored with the largest odd
// window that fits.
SsimConfig ssim_config(int image_size) {
  SsimConfig c;
  if (image_size < c.window) c.window = image_size % 2 ? image_size : image_size - 1;
  return c;
}

constexpr std::uint64_t kEvalNormSeed = 0x6576616cULL;

// Which training run and which checkpoint a learned method uses.
struct LearnedMethod {
  const char* run;
  bool oracle;
};

std::optional<LearnedMethod> learned_method(const std::string& m) {
  if (m == "deq-plain") return LearnedMethod{"plain", false};
  if (m == "deq-tv") return LearnedMethod{"tv", false};
  if (m == "hydra-auto") return LearnedMethod{"hydra", false};
  if (m == "hydra-max") return LearnedMethod{"hydra", true};
  return std::nullopt;
}

std::string key(const std::string& method, int n_views) {
  return method + "@" + std::to_string(n_views);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> methods = {"fbp",    "tv",         "deq-plain",
                                                   "deq-tv", "hydra-auto", "hydra-max"};
  return methods;
}

void EvalConfig::validate() const {
  if (methods.empty()) throw ConfigError("evaluation.methods must not be empty");
  for (const auto& m : methods)
    if (std::find(all_methods().begin(), all_methods().end(), m) == all_methods().end())
      throw ConfigError("unknown evaluation method '" + m + "'");
  if (!(fbp.cutoff > 0.0 && fbp.cutoff <= 1.0)) throw ConfigError("fbp.cutoff must be in (0, 1]");
  tv.validate();
  if (tv_grid_samples < 1) throw ConfigError("evaluation.tv_grid_samples must be positive");
  if (oracle_val_samples < 1) throw ConfigError("evaluation.oracle_val_samples must be positive");
  if (max_test_samples < 0) throw ConfigError("evaluation.max_test_samples must be nonnegative");
  solver.validate();
}

const MetricsRow* MetricsReport::find(const std::string& method, int n_views) const {
  for (const auto& r : rows)
    if (r.method == method && r.n_views == n_views) return &r;
  return nullptr;
}

Image reconstruct_equilibrium(const Checkpoint& ckpt, const Sinogram& y,
                              const EquilibriumConfig& solver, SolveReport* report) {
  RadonOperator op(ckpt.geometry);
  op.set_norm_sq(ckpt.norm_sq);
  if (y.n_angles != op.n_angles() || y.n_detectors != op.n_detectors())
    throw DimensionError("sinogram shape " + std::to_string(y.n_angles) + "x" +
                         std::to_string(y.n_detectors) + " does not match checkpoint geometry " +
                         std::to_string(op.n_angles()) + "x" + std::to_string(op.n_detectors()));
  auto [x, rep] = solve_equilibrium(ckpt.net, op, ckpt.config.layer, solver, y);
  if (report) *report = std::move(rep);
  return x;
}

std::vector<OraclePoint> oracle_curve(const fs::path& run_dir, const Dataset& data,
                                      const EvalConfig& cfg, int threads) {
  const int n = std::min(cfg.oracle_val_samples, data.count(Split::val));
  if (n < 1) throw DataError("validation split is empty");
  std::vector<Sinogram> ys;
  std::vector<Image> refs;
  for (int i = 0; i < n; ++i) {
    ys.push_back(data.noisy(Split::val, i));
    refs.push_back(data.phantom(Split::val, i));
  }
  std::vector<OraclePoint> curve;
  for (std::int64_t step : list_checkpoints(run_dir)) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_dir(run_dir, step));
    std::vector<double> values(ys.size());
    parallel_for(ys.size(), threads, [&](std::size_t i) {
      values[i] = psnr(reconstruct_equilibrium(ckpt, ys[i], cfg.solver), refs[i]);
    });
    double sum = 0.0;
    for (double v : values) sum += v;
    curve.push_back(OraclePoint{step, sum / n, ckpt.stop_metric});
  }
  return curve;
}

MetricsReport evaluate(const std::vector<EvalInput>& inputs, const EvalConfig& cfg,
                       const fs::path& out_dir, int threads, std::ostream* log) {
  cfg.validate();
  fs::create_directories(out_dir);
  MetricsReport report;
  auto note = [&](const std::string& msg) {
    if (log) *log << msg << "\n";
  };

  for (const auto& input : inputs) {
    if (!input.data) throw DataError("evaluation input without a dataset");
    const Dataset& data = *input.data;
    const int views = data.n_views();
    RadonOperator op = data.make_operator();
    estimate_operator_norm(op, 100, kEvalNormSeed);

    int n_test = data.count(Split::test);
    if (cfg.max_test_samples > 0) n_test = std::min(n_test, cfg.max_test_samples);
    if (n_test < 1) throw DataError("test split is empty");
    std::vector<Sinogram> ys;
    std::vector<Image> refs;
    for (int i = 0; i < n_test; ++i) {
      ys.push_back(data.noisy(Split::test, i));
      refs.push_back(data.phantom(Split::test, i));
    }

    for (const auto& method : cfg.methods) {
      const std::string k = key(method, views);
      std::function<Image(const Sinogram&, SampleResult&)> recon;
      std::optional<Checkpoint> ckpt;
      TvConfig tv = cfg.tv;

      if (method == "fbp") {
        recon = [&](const Sinogram& y, SampleResult&) { return fbp(op, y, cfg.fbp); };
      } else if (method == "tv") {
        if (cfg.tv_grid_search) {
          const int n = std::min(cfg.tv_grid_samples, data.count(Split::val));
          std::vector<Sinogram> vy;
          std::vector<Image> vx;
          for (int i = 0; i < n; ++i) {
            vy.push_back(data.noisy(Split::val, i));
            vx.push_back(data.phantom(Split::val, i));
          }
          tv.alpha = grid_search_alpha(op, vy, vx, cfg.tv, threads).best_alpha;
        }
        std::ostringstream sel;
        sel << "alpha=" << tv.alpha;
        report.selections[k] = sel.str();
        recon = [&op, tv](const Sinogram& y, SampleResult&) { return pgd_reconstruct(op, y, tv); };
      } else {
        const auto lm = learned_method(method);
        const auto run = input.runs.find(lm->run);
        if (run == input.runs.end()) {
          report.skipped.push_back(k + ": no '" + std::string(lm->run) + "' training run given");
          note("skip " + report.skipped.back());
          continue;
        }
        std::optional<std::int64_t> step;
        if (lm->oracle) {
          const auto curve = oracle_curve(run->second, data, cfg, threads);
          double best = -1.0;
          for (const auto& p : curve)
            if (!step || p.val_psnr_db > best) {
              best = p.val_psnr_db;
              step = p.step;
            }
        } else {
          step = best_checkpoint(run->second);
        }
        if (!step || !fs::exists(checkpoint_dir(run->second, *step) / "index.json")) {
          report.skipped.push_back(k + ": no checkpoint in " + run->second.string());
          note("skip " + report.skipped.back());
          continue;
        }
        ckpt.emplace(load_checkpoint(checkpoint_dir(run->second, *step)));
        if (!(ckpt->geometry == op.geometry())) {
          report.skipped.push_back(k + ": checkpoint geometry does not match the dataset");
          note("skip " + report.skipped.back());
          continue;
        }
        report.selections[k] = "step=" + std::to_string(*step);
        recon = [&](const Sinogram& y, SampleResult& r) {
          SolveReport rep;
          Image x = reconstruct_equilibrium(*ckpt, y, cfg.solver, &rep);
          r.solver_iterations = rep.iterations;
          r.converged = rep.converged;
          return x;
        };
      }

      const fs::path img_dir = out_dir / "recon" / method / ("v" + std::to_string(views));
      if (cfg.save_images) fs::create_directories(img_dir);
      std::vector<SampleResult> results(static_cast<std::size_t>(n_test));
      parallel_for(ys.size(), threads, [&](std::size_t i) {
        SampleResult& r = results[i];
        r.method = method;
        r.n_views = views;
        r.sample_id = static_cast<int>(i);
        const auto t0 = std::chrono::steady_clock::now();
        const Image x = recon(ys[i], r);
        r.time_s = seconds_since(t0);
        r.psnr_db = psnr(x, refs[i]);
        r.ssim = ssim(x, refs[i], ssim_config(x.size));
        if (cfg.save_images) {
          char name[32];
          std::snprintf(name, sizeof name, "sample_%05zu", i);
          save_tensor(img_dir / (std::string(name) + ".tns"), to_tensor(x));
          write_png(img_dir / (std::string(name) + ".png"), x);
        }
      });

      MetricsRow row{method, views, 0.0, 0.0, 0.0, n_test};
      for (const auto& r : results) {
        row.mean_psnr_db += r.psnr_db;
        row.mean_ssim += r.ssim;
        row.mean_time_s += r.time_s;
      }
      row.mean_psnr_db /= n_test;
      row.mean_ssim /= n_test;
      row.mean_time_s /= n_test;
      report.rows.push_back(row);
      report.samples.insert(report.samples.end(), results.begin(), results.end());
      std::ostringstream msg;
      msg << std::fixed << std::setprecision(3) << k << "  PSNR " << row.mean_psnr_db << "  SSIM "
          << std::setprecision(4) << row.mean_ssim << "  time " << row.mean_time_s << " s";
      note(msg.str());
    }
  }

  write_results_csv(out_dir / "results.csv", report);
  std::ofstream summary(out_dir / "summary.txt", std::ios::trunc);
  summary << format_summary(report);
  json sel = report.selections;
  json skipped = report.skipped;
  std::ofstream sel_out(out_dir / "selections.json", std::ios::trunc);
  sel_out << json{{"selections", sel}, {"skipped", skipped}}.dump(2) << "\n";
  return report;
}

void write_results_csv(const fs::path& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "method,n_views,sample_id,psnr_db,ssim,time_s\n" << std::setprecision(10);
  for (const auto& r : report.samples)
    out << r.method << ',' << r.n_views << ',' << r.sample_id << ',' << r.psnr_db << ',' << r.ssim
        << ',' << r.time_s << '\n';
}

std::string format_summary(const MetricsReport& report) {
  std::vector<std::string> methods;
  std::vector<int> views;
  for (const auto& r : report.rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    if (std::find(views.begin(), views.end(), r.n_views) == views.end()) views.push_back(r.n_views);
  }
  std::ostringstream out;
  out << std::left << std::setw(12) << "method";
  for (int v : views) {
    std::ostringstream head;
    head << v << " views";
    out << " | " << std::setw(26) << head.str();
  }
  out << "\n" << std::setw(12) << "";
  for (std::size_t i = 0; i < views.size(); ++i)
    out << " | " << std::right << std::setw(7) << "PSNR" << std::setw(8) << "SSIM" << std::setw(11)
        << "time (s)" << std::left;
  out << "\n";
  for (const auto& m : methods) {
    out << std::left << std::setw(12) << m;
    for (int v : views) {
      out << " | " << std::right;
      if (const auto* r = report.find(m, v)) {
        out << std::fixed << std::setw(7) << std::setprecision(2) << r->mean_psnr_db << std::setw(8)
            << std::setprecision(4) << r->mean_ssim << std::setw(11) << std::setprecision(4)
            << r->mean_time_s;
      } else {
        out << std::setw(7) << "-" << std::setw(8) << "-" << std::setw(11) << "-";
      }
      out << std::left;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hydra
