// Acceptance run: property suite, benchmark orderings, auto-stopping,
// solver efficiency, timing shape and the PSNR anchor. Prints one PASS/FAIL
// line per criterion and exits nonzero if any fails.
//
//   acceptance [--full] [--work DIR] [--threads N] [--skip-benchmark]
//
// The default benchmark is the reduced 32x32 / 20 test sample version;
// --full runs the 64x64 / 200 phantom sweep.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hydra/config.hpp"
#include "hydra/dataset.hpp"
#include "hydra/evaluate.hpp"
#include "hydra/fixed_point.hpp"
#include "hydra/layer.hpp"
#include "hydra/loss.hpp"
#include "hydra/metrics.hpp"
#include "hydra/radon.hpp"
#include "hydra/training.hpp"
#include "hydra/tv.hpp"
#include "hydra/vec.hpp"
#include "support.hpp"

#include <Eigen/Dense>

using namespace hydra;
using hydra::test::random_image;
using hydra::test::random_sinogram;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
  explicit Check(std::string n) : name(std::move(n)) {}

  std::string name;
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// ---- property suite oracles ----

double dot_test_f32(const RadonOperator& op, std::uint64_t seed) {
  const Image xd = random_image(op.image_size(), seed, -1.0, 1.0);
  const Sinogram ud = random_sinogram(op.n_angles(), op.n_detectors(), seed + 1);
  std::vector<float> x(xd.data.begin(), xd.data.end()), u(ud.data.begin(), ud.data.end());
  std::vector<float> ax(op.sinogram_numel()), atu(op.image_numel());
  op.forward<float>(x, ax);
  op.adjoint<float>(u, atu);
  double lhs = 0.0, rhs = 0.0, nax = 0.0, nu = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    lhs += double(ax[i]) * double(u[i]);
    nax += double(ax[i]) * double(ax[i]);
    nu += double(u[i]) * double(u[i]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) rhs += double(x[i]) * double(atu[i]);
  return std::abs(lhs - rhs) / (std::sqrt(nax) * std::sqrt(nu));
}

DenoiserOptions bench_network() {
  DenoiserOptions o;
  o.widths = {1, 16, 16, 16, 1};
  o.spectral_size = 32;
  return o;
}

// Subgradient descent with weighted averaging on 1/2 ||x - v||^2 + w TV_iso(x).
Image prox_by_subgradient(const Image& v, double w, int iters) {
  const int n = v.size;
  Image x = v, avg(n);
  double wsum = 0.0;
  std::vector<double> g(v.numel());
  for (int k = 1; k <= iters; ++k) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = x.data[i] - v.data[i];
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const double dx = c + 1 < n ? x(r, c + 1) - x(r, c) : 0.0;
        const double dy = r + 1 < n ? x(r + 1, c) - x(r, c) : 0.0;
        const double mag = std::hypot(dx, dy);
        if (mag == 0.0) continue;
        const double gx = w * dx / mag, gy = w * dy / mag;
        const std::size_t i = static_cast<std::size_t>(r) * n + c;
        g[i] -= gx + gy;
        if (c + 1 < n) g[i + 1] += gx;
        if (r + 1 < n) g[i + n] += gy;
      }
    const double step = 1.0 / (k + 1);
    for (std::size_t i = 0; i < g.size(); ++i) x.data[i] -= step * g[i];
    wsum += k;
    const double a = k / wsum;
    for (std::size_t i = 0; i < g.size(); ++i) avg.data[i] += a * (x.data[i] - avg.data[i]);
  }
  return avg;
}

double ssim_naive(const Image& x, const Image& y) {
  const int win = 11, n = x.size;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  std::vector<double> w(win * win);
  double total_w = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - 5.0, dj = j - 5.0;
      w[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      total_w += w[i * win + j];
    }
  for (auto& v : w) v /= total_w;
  double acc = 0.0;
  int count = 0;
  for (int r = 0; r + win <= n; ++r)
    for (int c = 0; c + win <= n; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          mx += w[i * win + j] * x(r + i, c + j);
          my += w[i * win + j] * y(r + i, c + j);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double a = x(r + i, c + j) - mx, b = y(r + i, c + j) - my;
          vx += w[i * win + j] * a * a;
          vy += w[i * win + j] * b * b;
          cxy += w[i * win + j] * a * b;
        }
      acc += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return acc / count;
}

double surrogate_value(const DenoiserNet& net, const RadonOperator& op, const LayerConfig& layer,
                       const LossConfig& loss, const Image& x_star, const Sinogram& y,
                       const Image& noise) {
  const Image x1 = layer_apply(net, op, layer, x_star, y);
  const Sinogram ax = radon_forward(op, x1);
  double dc = 0.0;
  for (std::size_t i = 0; i < ax.numel(); ++i) dc += (ax.data[i] - y.data[i]) * (ax.data[i] - y.data[i]);
  switch (loss.mode) {
    case LossMode::plain: return dc;
    case LossMode::tv: return dc + loss.tv_alpha * tv_value(x1, loss.tv_variant);
    case LossMode::hydra: {
      Image u = x_star;
      for (std::size_t i = 0; i < u.numel(); ++i) u.data[i] += noise.data[i];
      const Image du = denoiser_forward(net, u);
      double reg = 0.0;
      for (std::size_t i = 0; i < u.numel(); ++i) reg += (du.data[i] - x_star.data[i]) * (du.data[i] - x_star.data[i]);
      return dc + loss.effective_gamma(op.require_norm_sq()) * reg;
    }
  }
  return 0.0;
}

Check property_suite() {
  Check c{"1 property suite"};
  const auto t0 = Clock::now();

  double dot_worst = 0.0;
  for (int views : {16, 32, 64}) {
    const auto op = RadonOperator::parallel_beam(64, 192, views);
    for (int k = 0; k < 3; ++k) dot_worst = std::max(dot_worst, dot_test_f32(op, 10 * views + k));
  }
  c.require(dot_worst < 1e-5, "f32 dot test");
  c.detail << " dot=" << dot_worst;

  auto op = RadonOperator::parallel_beam(32, 192, 16, 4.0 / 32);
  estimate_operator_norm(op, 100, 1);
  const LayerConfig layer;
  const DenoiserOptions net_opts = bench_network();
  const double bound = layer.lambda * net_opts.lipschitz_budget + (1.0 - layer.lambda);
  double ratio_worst = 0.0, unique_worst = 0.0;
  for (int s = 0; s < 4; ++s) {
    const auto net = DenoiserNet::initialized(net_opts, 100 + s);
    const Sinogram y = radon_forward(op, random_image(32, 200 + s));
    for (int k = 0; k < 10; ++k) {
      const Image a = random_image(32, 300 + 20 * s + k, -0.5, 1.5);
      const Image b = random_image(32, 400 + 20 * s + k, -0.5, 1.5);
      ratio_worst = std::max(ratio_worst, vec::dist(layer_apply(net, op, layer, a, y).data,
                                                    layer_apply(net, op, layer, b, y).data) /
                                              vec::dist(a.data, b.data));
    }
    EquilibriumConfig eq;
    eq.init = InitKind::zero;
    const auto [x1, r1] = solve_equilibrium(net, op, layer, eq, y);
    eq.init = InitKind::fbp;
    const auto [x2, r2] = solve_equilibrium(net, op, layer, eq, y);
    c.require(r1.converged && r2.converged, "uniqueness solves converge");
    unique_worst = std::max(unique_worst, vec::dist(x1.data, x2.data) / (eq.tol * vec::norm(x1.data)));
  }
  c.require(ratio_worst <= bound + 1e-9, "contraction factor");
  c.require(unique_worst <= 5.0, "uniqueness within 5x tolerance");
  c.detail << " contraction=" << ratio_worst << "/" << bound << " uniqueness=" << unique_worst << "xtol";

  {
    auto op8 = RadonOperator::parallel_beam(8, 16, 8);
    estimate_operator_norm(op8, 100, 1);
    LayerConfig lin;
    lin.omega = Omega::identity;
    DenoiserOptions o;
    o.widths = {1, 4, 4, 1};
    o.spectral_size = 8;
    const auto net0 = DenoiserNet::initialized(o, 8);
    const Image x_star = random_image(8, 81, 0.2, 0.8);
    const Sinogram y = radon_forward(op8, random_image(8, 82));
    const Image noise = gaussian_noise(8, 0.15, 83);
    double fd_worst = 0.0;
    for (LossMode mode : {LossMode::hydra, LossMode::plain, LossMode::tv}) {
      LossConfig loss;
      loss.mode = mode;
      loss.tv_alpha = 0.5;
      const auto lg = surrogate_loss_and_grad(net0, op8, lin, loss, x_star, y, noise);
      std::mt19937_64 rng(9);
      std::uniform_int_distribution<std::size_t> pick(0, net0.params().size() - 1);
      const double h = 1e-5;
      for (int k = 0; k < 12; ++k) {
        const std::size_t i = pick(rng);
        DenoiserNet plus = net0, minus = net0;
        plus.params()[i] += h;
        minus.params()[i] -= h;
        const double fd = (surrogate_value(plus, op8, lin, loss, x_star, y, noise) -
                           surrogate_value(minus, op8, lin, loss, x_star, y, noise)) / (2 * h);
        fd_worst = std::max(fd_worst, std::abs(fd - lg.grad[i]) / std::max(1.0, std::abs(fd)));
      }
    }
    c.require(fd_worst < 1e-3, "JFB gradient vs finite differences");
    c.detail << " jfb_fd=" << fd_worst;
  }

  double prox_worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Image v = random_image(8, 40 + k);
    const double w = 0.05 + 0.05 * k;
    prox_worst = std::max(prox_worst, hydra::test::max_abs_diff(tv_prox(v, w, 20000).data,
                                                                prox_by_subgradient(v, w, 400000).data));
  }
  c.require(prox_worst < 1e-3, "TV prox vs subgradient oracle");
  c.detail << " tv_prox=" << prox_worst;

  double ssim_worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Image a = random_image(32, 4 + 2 * k), b = random_image(32, 5 + 2 * k);
    ssim_worst = std::max(ssim_worst, std::abs(ssim(a, b) - ssim_naive(a, b)));
    Image near = a;
    const Image d = random_image(32, 50 + k, -0.05, 0.05);
    for (std::size_t i = 0; i < a.numel(); ++i) near.data[i] += d.data[i];
    ssim_worst = std::max(ssim_worst, std::abs(ssim(near, a) - ssim_naive(near, a)));
  }
  c.require(ssim_worst < 1e-6, "SSIM vs naive oracle");
  c.detail << " ssim=" << ssim_worst;

  const double elapsed = seconds_since(t0);
  c.require(elapsed < 300.0, "runtime under 5 min");
  c.detail << " time=" << elapsed << "s";
  return c;
}

// f(x) = c M x + b, M symmetric with spectrum spread over [-1, 1].
Check anderson_vs_picard() {
  Check c{"4a anderson vs picard"};
  const int n = 40;
  std::srand(5);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Random(n, n));
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = -1.0 + 2.0 * i / (n - 1);
  const Eigen::MatrixXd m = 0.95 * q * d.asDiagonal() * q.transpose();
  const Eigen::VectorXd b = Eigen::VectorXd::Random(n);
  const FixedPointMap f = [&](std::span<const double> x, std::span<double> fx) {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
    Eigen::Map<Eigen::VectorXd>(fx.data(), n) = m * xv + b;
  };
  EquilibriumConfig cfg;
  cfg.tol = 1e-3;
  cfg.max_iters = 1000;
  cfg.method = SolverMethod::picard;
  const auto picard = solve_fixed_point(f, std::vector<double>(n, 0.0), cfg);
  cfg.method = SolverMethod::anderson;
  const auto anderson = solve_fixed_point(f, std::vector<double>(n, 0.0), cfg);
  c.require(picard.report.converged && anderson.report.converged, "both converge");
  c.require(anderson.report.iterations < picard.report.iterations, "anderson strictly fewer iterations");
  c.detail << " anderson=" << anderson.report.iterations << " picard=" << picard.report.iterations;
  return c;
}

Check psnr_anchor() {
  Check c{"6 psnr anchor"};
  const Image ref = random_image(64, 3, 0.0, 0.9);
  Image x = ref;
  for (auto& v : x.data) v += 0.1;
  const double p = psnr(x, ref, 1.0);
  c.require(std::abs(p - 20.0) <= 1e-9, "20 dB within 1e-9");
  char buf[64];
  std::snprintf(buf, sizeof buf, " psnr=%.12f", p);
  c.detail << buf;
  return c;
}

// ---- benchmark ----

RunConfig benchmark_config(bool full) {
  const int size = full ? 64 : 32;
  json j = {
      {"seed", std::uint64_t{2024}},
      {"geometry", {{"image_size", size}, {"n_full_angles", 192}, {"views", {16, 32, 64}}}},
      {"data", full ? json{{"n_samples", 200}, {"train", 120}, {"val", 30}, {"test", 50}}
                    : json{{"n_samples", 100}, {"train", 60}, {"val", 20}, {"test", 20}}},
      {"training",
       {{"max_steps", 3000},
        {"adam", {{"lr", 3e-4}}},
        {"network", {{"widths", {1, 16, 16, 16, 1}}, {"spectral_size", size}}},
        {"stopping", {{"eval_every", 200}, {"patience", 5}, {"val_subset_size", 8}}}}},
      {"evaluation", {{"tv_grid_samples", 8}, {"oracle_val_samples", 8}, {"save_images", false}}}};
  RunConfig cfg = run_config_from_json(j);
  cfg.validate();
  return cfg;
}

double row_psnr(const MetricsReport& r, const std::string& m, int v) {
  const auto* row = r.find(m, v);
  return row ? row->mean_psnr_db : std::nan("");
}

std::int64_t selected_step(const MetricsReport& r, const std::string& key) {
  const auto it = r.selections.find(key);
  if (it == r.selections.end() || it->second.rfind("step=", 0) != 0) return -1;
  return std::stoll(it->second.substr(5));
}

std::vector<Check> benchmark(bool full, const fs::path& work, int threads) {
  const RunConfig cfg = benchmark_config(full);
  const auto& views = cfg.geometry.views;
  const std::vector<std::string> learned = {"deq-plain", "deq-tv", "hydra-auto", "hydra-max"};
  const std::map<std::string, LossMode> modes = {
      {"hydra", LossMode::hydra}, {"plain", LossMode::plain}, {"tv", LossMode::tv}};

  const auto t0 = Clock::now();
  std::vector<Dataset> datasets;
  for (int v : views) {
    const fs::path root = work / "data" / ("views_" + std::to_string(v));
    build_dataset(dataset_plan(cfg, v), root, true, threads);
    datasets.push_back(Dataset::open(root));
  }

  std::vector<EvalInput> inputs;
  for (const auto& data : datasets) {
    EvalInput in{&data, {}};
    for (const auto& [name, mode] : modes) {
      TrainConfig tc = cfg.training;
      tc.loss.mode = mode;
      const fs::path run = work / ("run_" + name + "_" + std::to_string(data.n_views()));
      fs::remove_all(run);
      TrainOptions opts;
      opts.threads = threads;
      const auto r = train(data, tc, run, opts);
      std::cout << "trained " << name << " at " << data.n_views() << " views: step " << r.final_step
                << ", best " << r.best_step << "\n";
      in.runs[name] = run;
    }
    inputs.push_back(std::move(in));
  }
  const MetricsReport report = evaluate(inputs, cfg.evaluation, work / "eval", threads);
  std::cout << format_summary(report);
  const double elapsed = seconds_since(t0);

  std::vector<Check> out;
  const std::string scale = full ? " (64x64, " : " (32x32, ";

  Check c2{"2 orderings"};
  int min_count = 1 << 30;
  for (const auto& row : report.rows) min_count = std::min(min_count, row.count);
  if (full) c2.require(min_count >= 50, "at least 50 test samples");
  for (int v : views) {
    const auto* tv = report.find("tv", v);
    const auto* fbp = report.find("fbp", v);
    const std::string at = "@" + std::to_string(v);
    c2.require(tv && fbp && tv->mean_psnr_db > fbp->mean_psnr_db, "tv > fbp psnr" + at);
    c2.require(tv && fbp && tv->mean_ssim > fbp->mean_ssim, "tv > fbp ssim" + at);
    const double hmax = row_psnr(report, "hydra-max", v);
    c2.require(hmax >= row_psnr(report, "deq-plain", v), "hydra-max >= deq-plain" + at);
    c2.require(hmax >= row_psnr(report, "deq-tv", v), "hydra-max >= deq-tv" + at);
  }
  for (const auto& m : learned)
    for (std::size_t i = 1; i < views.size(); ++i)
      c2.require(row_psnr(report, m, views[i]) > row_psnr(report, m, views[i - 1]),
                 m + " monotone in views");
  c2.detail << scale << min_count << " test samples, " << elapsed << "s)";
  out.push_back(std::move(c2));

  Check c3{"3 auto-stopping"};
  const int interval = cfg.training.stopping.eval_every;
  for (int v : views) {
    const std::string at = "@" + std::to_string(v);
    const double gap = row_psnr(report, "hydra-max", v) - row_psnr(report, "hydra-auto", v);
    const std::int64_t s_auto = selected_step(report, "hydra-auto" + at);
    const std::int64_t s_max = selected_step(report, "hydra-max" + at);
    c3.require(std::abs(gap) <= 0.5, "psnr gap" + at);
    c3.require(s_auto >= 0 && s_max >= 0 && std::abs(s_auto - s_max) <= 2 * interval, "step distance" + at);
    c3.detail << " " << v << "v: gap=" << gap << "dB auto=" << s_auto << " oracle=" << s_max;
  }
  out.push_back(std::move(c3));

  Check c4{"4b solver iterations"};
  int solves = 0, fast = 0;
  for (const auto& s : report.samples)
    if (s.solver_iterations > 0) {
      ++solves;
      if (s.converged && s.solver_iterations <= 50) ++fast;
    }
  const double frac = solves ? double(fast) / solves : 0.0;
  c4.require(solves > 0 && frac >= 0.95, "95% of solves within 50 iterations");
  c4.detail << " " << fast << "/" << solves << " solves converged within 50 iterations";
  out.push_back(std::move(c4));

  Check c5{"5 timing shape"};
  for (int v : views) {
    const std::string at = "@" + std::to_string(v);
    const auto* fbp = report.find("fbp", v);
    const auto* tv = report.find("tv", v);
    for (const auto& m : {std::string("hydra-auto"), std::string("hydra-max")}) {
      const auto* h = report.find(m, v);
      c5.require(h && tv && h->mean_time_s < tv->mean_time_s, m + " faster than tv" + at);
    }
    for (const auto& row : report.rows)
      if (row.n_views == v && row.method != "fbp")
        c5.require(fbp && fbp->mean_time_s < row.mean_time_s, "fbp fastest" + at);
    const auto* h = report.find("hydra-auto", v);
    if (fbp && tv && h)
      c5.detail << " " << v << "v: fbp=" << fbp->mean_time_s << "s tv=" << tv->mean_time_s
                << "s hydra=" << h->mean_time_s << "s";
  }
  out.push_back(std::move(c5));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  bool full = false, skip_benchmark = false;
  std::string work = (fs::temp_directory_path() / "hydra_acceptance").string();
  int threads = 1;
  app.add_flag("--full", full, "Run the 64x64 / 200 phantom benchmark");
  app.add_flag("--skip-benchmark", skip_benchmark, "Only run the checks that need no training");
  app.add_option("--work", work, "Working directory for datasets and runs");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  std::vector<Check> checks;
  checks.push_back(property_suite());
  checks.push_back(anderson_vs_picard());
  checks.push_back(psnr_anchor());
  if (!skip_benchmark) {
    fs::create_directories(work);
    for (auto& c : benchmark(full, work, threads)) checks.push_back(std::move(c));
  }

  std::sort(checks.begin(), checks.end(), [](const Check& a, const Check& b) { return a.name < b.name; });
  bool ok = true;
  std::cout << "\n";
  for (const auto& c : checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << "criterion " << c.name << ":" << c.detail.str() << "\n";
    ok = ok && c.pass;
  }
  return ok ? 0 : 1;
}
