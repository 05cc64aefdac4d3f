// hydra: command-line driver for data generation, training, reconstruction
// and evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hydra/config.hpp"
#include "hydra/dataset.hpp"
#include "hydra/errors.hpp"
#include "hydra/evaluate.hpp"
#include "hydra/fbp.hpp"
#include "hydra/pgd.hpp"
#include "hydra/png.hpp"
#include "hydra/tensor_io.hpp"
#include "hydra/training.hpp"
#include "hydra/util.hpp"

namespace fs = std::filesystem;
using namespace hydra;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

RunConfig load_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

void write_outputs(const fs::path& out, const Image& x, const json& report) {
  fs::create_directories(out);
  save_tensor(out / "recon.tns", to_tensor(x));
  write_png(out / "recon.png", x);
  std::ofstream(out / "report.json", std::ios::trunc) << report.dump(2) << "\n";
}

// "mode=dir" or "mode:views=dir"
struct RunSpec {
  std::string mode;
  int views = 0;  // 0: every dataset
  fs::path dir;
};

RunSpec parse_run_spec(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("bad --ckpts entry '" + s + "', expected mode[:views]=dir");
  RunSpec r;
  std::string lhs = s.substr(0, eq);
  r.dir = s.substr(eq + 1);
  const auto colon = lhs.find(':');
  if (colon != std::string::npos) {
    try {
      r.views = std::stoi(lhs.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad view count in --ckpts entry '" + s + "'");
    }
    lhs = lhs.substr(0, colon);
  }
  parse_loss_mode(lhs);
  r.mode = lhs;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measurement-only deep-equilibrium reconstruction for sparse-view CT"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: HYDRA_THREADS or 1)")->check(CLI::NonNegativeNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Simulate phantoms, sinograms and a hashed manifest");
  std::string gen_config, gen_out;
  std::vector<int> gen_views;
  bool gen_force = false;
  gen->add_option("--config", gen_config, "Run config JSON (defaults when omitted)");
  gen->add_option("--out", gen_out, "Output root; one dataset per view count in views_<n>/")->required();
  gen->add_option("--views", gen_views, "View counts, overriding geometry.views");
  gen->add_flag("--force", gen_force, "Overwrite existing datasets");

  // train
  auto* tr = app.add_subcommand("train", "Train the equilibrium model on one dataset");
  std::string tr_config, tr_data, tr_out, tr_mode, tr_resume;
  std::int64_t tr_max_steps = 0;
  tr->add_option("--config", tr_config, "Run config JSON (defaults when omitted)");
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--mode", tr_mode, "Loss: hydra, plain or tv (overrides training.loss.mode)")
      ->check(CLI::IsMember({"hydra", "plain", "tv"}));
  tr->add_option("--resume", tr_resume, "Checkpoint directory to continue from");
  tr->add_option("--max-steps", tr_max_steps, "Override training.max_steps");

  // reconstruct
  auto* rc = app.add_subcommand("reconstruct", "Equilibrium reconstruction of one sinogram");
  std::string rc_ckpt, rc_sino, rc_out, rc_config;
  rc->add_option("--ckpt", rc_ckpt, "Checkpoint directory, or a run directory (uses BEST)")->required();
  rc->add_option("--sinogram", rc_sino, "Sinogram tensor file")->required();
  rc->add_option("--out", rc_out, "Output directory")->required();
  rc->add_option("--config", rc_config, "Run config JSON; evaluation.solver is used");

  // baseline
  auto* bl = app.add_subcommand("baseline", "FBP or TV reconstruction of one sinogram");
  std::string bl_method, bl_data, bl_sino, bl_out, bl_config, bl_filter;
  double bl_alpha = -1.0;
  bl->add_option("--method", bl_method, "fbp or tv")->required()->check(CLI::IsMember({"fbp", "tv"}));
  bl->add_option("--data", bl_data, "Dataset directory providing the geometry")->required();
  bl->add_option("--sinogram", bl_sino, "Sinogram tensor file")->required();
  bl->add_option("--out", bl_out, "Output directory")->required();
  bl->add_option("--config", bl_config, "Run config JSON; evaluation.fbp / evaluation.tv are used");
  bl->add_option("--filter", bl_filter, "FBP filter: ram-lak, hann or none");
  bl->add_option("--alpha", bl_alpha, "TV weight (overrides evaluation.tv.alpha)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate all methods on the test split");
  std::string ev_config, ev_out;
  std::vector<std::string> ev_data, ev_ckpts, ev_methods;
  int ev_max_test = -1;
  ev->add_option("--config", ev_config, "Run config JSON; the evaluation section is used");
  ev->add_option("--data", ev_data, "Dataset directories (one per view count)")->required();
  ev->add_option("--ckpts", ev_ckpts, "Training runs as mode=dir or mode:views=dir");
  ev->add_option("--out", ev_out, "Output directory")->required();
  ev->add_option("--methods", ev_methods, "Subset of fbp, tv, deq-plain, deq-tv, hydra-auto, hydra-max");
  ev->add_option("--max-test-samples", ev_max_test, "Evaluate only the first N test samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const int nthreads = resolve_threads(threads);

    if (*gen) {
      RunConfig cfg = load_or_default(gen_config);
      if (!gen_views.empty()) cfg.geometry.views = gen_views;
      cfg.out_dir = gen_out;
      cfg.validate();
      for (int v : cfg.geometry.views) {
        const fs::path root = fs::path(gen_out) / ("views_" + std::to_string(v));
        const auto m = build_dataset(dataset_plan(cfg, v), root, gen_force, nthreads);
        std::cout << root.string() << ": " << m.samples.size() << " samples, " << v << " views\n";
      }
      echo_run_config(cfg, gen_out);
      return 0;
    }

    if (*tr) {
      RunConfig cfg = load_or_default(tr_config);
      if (!tr_mode.empty()) cfg.training.loss.mode = parse_loss_mode(tr_mode);
      if (tr_max_steps > 0) cfg.training.max_steps = tr_max_steps;
      cfg.out_dir = tr_out;
      cfg.validate();
      const Dataset data = Dataset::open(tr_data);
      echo_run_config(cfg, tr_out);
      TrainOptions opts;
      opts.threads = nthreads;
      opts.progress = &std::cout;
      if (!tr_resume.empty()) opts.resume = fs::path(tr_resume);
      const auto r = train(data, cfg.training, tr_out, opts);
      std::cout << "finished at step " << r.final_step << (r.halted ? " (patience exhausted)" : "")
                << ", best step " << r.best_step << "\n";
      return 0;
    }

    if (*rc) {
      const RunConfig cfg = load_or_default(rc_config);
      fs::path dir = rc_ckpt;
      if (!fs::exists(dir / "index.json")) {
        const auto best = best_checkpoint(dir);
        if (!best) throw DataError("no checkpoint at " + dir.string());
        dir = checkpoint_dir(dir, *best);
      }
      const Checkpoint ckpt = load_checkpoint(dir);
      const Sinogram y = sinogram_from_tensor(load_tensor(rc_sino));
      SolveReport rep;
      const Image x = reconstruct_equilibrium(ckpt, y, cfg.evaluation.solver, &rep);
      json report = report_to_json(rep);
      report["checkpoint"] = dir.string();
      write_outputs(rc_out, x, report);
      std::cout << "iterations " << rep.iterations << ", residual " << rep.final_residual
                << (rep.converged ? "" : " (not converged)") << "\n";
      return 0;
    }

    if (*bl) {
      const RunConfig cfg = load_or_default(bl_config);
      const Dataset data = Dataset::open(bl_data);
      RadonOperator op = data.make_operator();
      const Sinogram y = sinogram_from_tensor(load_tensor(bl_sino));
      if (y.n_angles != op.n_angles() || y.n_detectors != op.n_detectors())
        throw DimensionError("sinogram shape does not match the dataset geometry");
      Image x;
      json report{{"method", bl_method}};
      if (bl_method == "fbp") {
        FbpConfig f = cfg.evaluation.fbp;
        if (!bl_filter.empty()) f.filter = parse_filter_kind(bl_filter);
        x = fbp(op, y, f);
        report["filter"] = to_string(f.filter);
      } else {
        TvConfig tv = cfg.evaluation.tv;
        if (bl_alpha >= 0.0) tv.alpha = bl_alpha;
        tv.validate();
        estimate_operator_norm(op, 100, 0);
        x = pgd_reconstruct(op, y, tv);
        report["alpha"] = tv.alpha;
      }
      write_outputs(bl_out, x, report);
      return 0;
    }

    if (*ev) {
      RunConfig cfg = load_or_default(ev_config);
      if (!ev_methods.empty()) cfg.evaluation.methods = ev_methods;
      if (ev_max_test >= 0) cfg.evaluation.max_test_samples = ev_max_test;
      cfg.evaluation.validate();
      std::vector<Dataset> datasets;
      for (const auto& d : ev_data) datasets.push_back(Dataset::open(d));
      std::vector<RunSpec> specs;
      for (const auto& s : ev_ckpts) specs.push_back(parse_run_spec(s));
      std::vector<EvalInput> inputs;
      for (const auto& d : datasets) {
        EvalInput in{&d, {}};
        for (const auto& s : specs)
          if (s.views == 0 || s.views == d.n_views()) in.runs[s.mode] = s.dir;
        inputs.push_back(std::move(in));
      }
      const auto report = evaluate(inputs, cfg.evaluation, ev_out, nthreads, &std::cerr);
      cfg.out_dir = ev_out;
      echo_run_config(cfg, ev_out);
      std::cout << format_summary(report);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DomainError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
