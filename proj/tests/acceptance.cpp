// Acceptance gate: ten pinned criteria, one PASS/FAIL line each, exit code
// equal to the number of failures. Budget-sensitive schedules are pinned
// here, not read from flags, so a run is comparable across machines.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "fmlab/experiment.hpp"
#include "fmlab/linalg.hpp"
#include "fmlab/metrics.hpp"
#include "fmlab/prng.hpp"
#include "fmlab/sampler.hpp"
#include "fmlab/scores.hpp"
#include "fmlab/train.hpp"

using namespace fmlab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::chrono::steady_clock::time_point g_suite_start;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void report(const std::string& id, bool pass, const std::string& detail,
            double secs) {
  if (!pass) ++g_failures;
  std::printf("%-4s %s  %s  [%.1fs]\n", id.c_str(), pass ? "PASS" : "FAIL",
              detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

// Combined standard error of a difference of two paired-set means.
double combined_se(const SimilarityReport& r) {
  double n = static_cast<double>(r.n_pairs);
  return std::sqrt((r.matched_std * r.matched_std +
                    r.shuffled_std * r.shuffled_std) /
                   n);
}

double sim_margin(const nlohmann::json& sim) {
  SimilarityReport r;
  r.matched_mean = sim.at("matched_mean").get<double>();
  r.matched_std = sim.at("matched_std").get<double>();
  r.shuffled_mean = sim.at("shuffled_mean").get<double>();
  r.shuffled_std = sim.at("shuffled_std").get<double>();
  r.n_pairs = sim.at("n_pairs").get<size_t>();
  double se = combined_se(r);
  return (r.matched_mean - r.shuffled_mean) / (se > 0 ? se : 1e-12);
}

// ---- A1: gradient scoring vs finite-difference oracle ----------------------

void a1() {
  auto t0 = std::chrono::steady_clock::now();
  DatasetBundle ds = generate_dataset("eight-gaussians", 8, {}, 3);
  SubsetManifest full = full_subset(ds);
  TrainConfig tc;
  tc.steps = 60;
  tc.batch = 8;
  tc.seed = 5;
  VelocityModel surrogate = build_model(Arch::MlpMicro, 2, 9);
  train_model(surrogate, ds, full, tc);

  ScoreConfig sc;  // defaults: T=8, M=2, exact-mean
  sc.noise_seed = 1234;
  ScoreTable table = score_grad(surrogate, ds, sc);

  // Independent brute-force evaluation: central finite differences over every
  // parameter entry, per (sample, timestep, noise point), then the same
  // exact-mean normalization.
  const size_t T = 8, M = 2, n = ds.n, d = ds.dim;
  std::vector<double> noise(M * d);
  for (size_t m = 0; m < M; ++m) {
    for (size_t c = 0; c < d; ++c) {
      noise[m * d + c] = counter_gaussian(sc.noise_seed, m, c);
    }
  }
  const double eps = 1e-5;
  std::vector<double> raw(n * T * M);
  for (size_t i = 0; i < n; ++i) {
    Tensor x1({1, d}, std::vector<double>(ds.sample(i), ds.sample(i) + d));
    for (size_t k = 0; k < T; ++k) {
      Tensor t({1}, {(static_cast<double>(k) + 0.5) / T});
      for (size_t m = 0; m < M; ++m) {
        Tensor x0({1, d}, std::vector<double>(noise.begin() + m * d,
                                              noise.begin() + (m + 1) * d));
        double sq = 0.0;
        for (auto& p : surrogate.params) {
          for (size_t j = 0; j < p.value.size(); ++j) {
            double saved = p.value.data()[j];
            p.value.mutable_data()[j] = saved + eps;
            double up = fm_loss(surrogate, x1, x0, t).item();
            p.value.mutable_data()[j] = saved - eps;
            double dn = fm_loss(surrogate, x1, x0, t).item();
            p.value.mutable_data()[j] = saved;
            double g = (up - dn) / (2.0 * eps);
            sq += g * g;
          }
        }
        raw[(i * T + k) * M + m] = sq;
      }
    }
  }
  std::vector<double> expect(n, 0.0);
  for (size_t k = 0; k < T; ++k) {
    double mu = 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t m = 0; m < M; ++m) mu += raw[(i * T + k) * M + m];
    }
    mu /= static_cast<double>(n * M);
    for (size_t i = 0; i < n; ++i) {
      for (size_t m = 0; m < M; ++m) {
        expect[i] += raw[(i * T + k) * M + m] / mu;
      }
    }
  }
  double worst = 0.0;
  for (size_t i = 0; i < n; ++i) {
    expect[i] /= static_cast<double>(T * M);
    worst = std::max(worst,
                     std::abs(table.scores[i] - expect[i]) / expect[i]);
  }
  double secs = seconds_since(t0);
  bool pass = worst < 1e-3 && surrogate.param_count() <= 100 && secs < 30.0;
  report("A1", pass,
         "grad scores vs FD oracle: worst rel err " + fmt(worst, 7) + " (" +
             std::to_string(surrogate.param_count()) + " params)",
         secs);
}

// ---- A2: disjoint-subset stability ------------------------------------------

void a2(ExperimentContext& ctx) {
  auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail = "matched-shuffled margin (x combined SE):";
  for (uint64_t seed : {101, 102, 103}) {
    nlohmann::json j = {
        {"kind", "disjoint-subsets"},
        {"seed", seed},
        {"dataset", {{"name", "eight-gaussians"}, {"n", 8192}}},
        {"train", {{"steps", 10000}, {"batch", 256}}},
        {"sampler", {{"method", "midpoint"}, {"steps", 32}, {"pairs", 512}}}};
    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    nlohmann::json manifest = run_experiment(cfg, ctx);
    double margin = sim_margin(manifest.at("similarity"));
    pass = pass && margin > 5.0;
    detail += " " + fmt(margin, 1);
  }
  report("A2", pass, detail + " (need > 5.0 each)", seconds_since(t0));
}

// ---- A3: mode removal -------------------------------------------------------

void a3(ExperimentContext& ctx) {
  auto t0 = std::chrono::steady_clock::now();
  nlohmann::json j = {
      {"kind", "mode-removal"},
      {"seed", 7},
      {"dataset",
       {{"name", "eight-gaussians"}, {"n", 4096}, {"params", {{"balanced", true}}}}},
      {"drop_modes", {0}},
      {"train", {{"steps", 6000}, {"batch", 256}}},
      {"sampler", {{"method", "midpoint"}, {"steps", 32}, {"pairs", 512}}}};
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  nlohmann::json manifest = run_experiment(cfg, ctx);
  const auto& cov = manifest.at("pruned_model_coverage");
  size_t dropped_hits = cov.at("counts")[0].get<size_t>();
  size_t total = cov.at("total").get<size_t>();
  double dropped_frac = static_cast<double>(dropped_hits) / total;
  double margin = sim_margin(manifest.at("retained_similarity"));
  bool pass = dropped_frac < 0.01 && margin > 5.0;
  report("A3", pass,
         "dropped-mode coverage " + fmt(100 * dropped_frac, 2) +
             "% (need < 1%), retained-pair margin " + fmt(margin, 1) +
             "x SE (need > 5)",
         seconds_since(t0));
}

// ---- A4: architecture ordering ----------------------------------------------

void a4(ExperimentContext& ctx) {
  auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail = "sim(xl,s) vs sim(xl,fourier):";
  for (uint64_t seed : {201, 202, 203}) {
    nlohmann::json j = {
        {"kind", "arch-change"},
        {"seed", seed},
        {"dataset", {{"name", "eight-gaussians"}, {"n", 4096}}},
        {"archs", {"mlp-xl", "mlp-s", "resmlp", "fourier-mlp"}},
        {"train", {{"steps", 1500}, {"batch", 256}}},
        {"sampler", {{"method", "midpoint"}, {"steps", 32}, {"pairs", 512}}}};
    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    nlohmann::json manifest = run_experiment(cfg, ctx);
    double cap = 0, full = 0, cap_margin = 0, full_margin = 0;
    for (const auto& row : manifest.at("pairwise_similarity")) {
      std::string a = row.at("a"), b = row.at("b");
      double mm = row.at("similarity").at("matched_mean").get<double>();
      if (a == "mlp-xl" && b == "mlp-s") {
        cap = mm;
        cap_margin = sim_margin(row.at("similarity"));
      }
      if (a == "mlp-xl" && b == "fourier-mlp") {
        full = mm;
        full_margin = sim_margin(row.at("similarity"));
      }
    }
    pass = pass && cap >= full && cap_margin > 0 && full_margin > 0;
    detail += " " + fmt(cap, 3) + ">=" + fmt(full, 3);
  }
  report("A4", pass, detail + " in 3/3 seeds, both above shuffled",
         seconds_since(t0));
}

// ---- A5 + A6: pruning sweep on the imbalanced variant -----------------------

void a5_a6(ExperimentContext& ctx) {
  auto t0 = std::chrono::steady_clock::now();
  int clust_wins = 0, loss_wins = 0;
  bool random_ok = true;
  std::string d5 = "frechet clust-b vs clust-p:", d6 = "loss vs loss-inv:";
  for (uint64_t seed : {301, 302, 303}) {
    nlohmann::json j = {
        {"kind", "pruning-sweep"},
        {"seed", seed},
        {"dataset",
         {{"name", "eight-gaussians"},
          {"n", 2048},
          {"params",
           {{"weights", {0.4, 0.2, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05}}}}}},
        {"train", {{"steps", 2500}, {"batch", 256}}},
        {"prune",
         {{"pr", 0.5},
          {"k", 24},
          {"methods",
           {"unpruned", "random", "loss", "loss-inv", "clust-p", "clust-b"}}}},
        {"sampler",
         {{"method", "midpoint"}, {"steps", 16}, {"eval_samples", 1024}}}};
    ExperimentConfig cfg = ExperimentConfig::from_json(j);
    nlohmann::json manifest = run_experiment(cfg, ctx);
    double unpruned = 0, random_f = 0, loss = 0, loss_inv = 0, cp = 0, cb = 0;
    for (const auto& row : manifest.at("rows")) {
      std::string m = row.at("method");
      double f = row.at("frechet").get<double>();
      if (m == "unpruned") unpruned = f;
      if (m == "random") random_f = f;
      if (m == "loss") loss = f;
      if (m == "loss-inv") loss_inv = f;
      if (m == "clust-p") cp = f;
      if (m == "clust-b") cb = f;
    }
    if (cb <= cp) ++clust_wins;
    if (loss >= loss_inv) ++loss_wins;
    random_ok = random_ok && random_f <= 2.0 * unpruned;
    d5 += " " + fmt(cb, 3) + "/" + fmt(cp, 3);
    d6 += " " + fmt(loss, 3) + "/" + fmt(loss_inv, 3);
  }
  double secs = seconds_since(t0);
  report("A5", clust_wins >= 2 && random_ok,
         d5 + " (" + std::to_string(clust_wins) +
             "/3 wins, need >= 2; random within 2x unpruned: " +
             (random_ok ? "yes" : "no") + ")",
         secs);
  report("A6", loss_wins >= 2,
         d6 + " (" + std::to_string(loss_wins) + "/3 wins, need >= 2)", 0.0);
}

// ---- A7: metric exactness ---------------------------------------------------

void a7() {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<double> a = {-1.0, 1.0}, b = {1.0, 3.0}, c = {0.0, 0.0};
  double e1 = std::abs(frechet_distance(a, 2, b, 2, 1) - 4.0);
  double e2 = std::abs(frechet_distance(a, 2, c, 2, 1) - 1.0);
  double e3 = frechet_distance(a, 2, a, 2, 1);

  Rng rng(808);
  size_t n = 256;
  std::vector<double> p(n * 2), q(n * 2);
  for (double& v : p) v = rng.next_gaussian();
  for (double& v : q) v = 1.5 * rng.next_gaussian() + 0.3;
  double base = frechet_distance(p, n, q, n, 2);
  double ct = std::cos(1.1), st = std::sin(1.1);
  std::vector<double> pr(n * 2), qr(n * 2);
  for (size_t i = 0; i < n; ++i) {
    pr[2 * i] = ct * p[2 * i] - st * p[2 * i + 1];
    pr[2 * i + 1] = st * p[2 * i] + ct * p[2 * i + 1];
    qr[2 * i] = ct * q[2 * i] - st * q[2 * i + 1];
    qr[2 * i + 1] = st * q[2 * i] + ct * q[2 * i + 1];
  }
  double e4 = std::abs(frechet_distance(pr, n, qr, n, 2) - base);
  bool pass = e1 < 1e-9 && e2 < 1e-9 && e3 < 1e-9 && e4 < 1e-8;
  report("A7", pass,
         "closed-form errs " + fmt(e1, 12) + "/" + fmt(e2, 12) +
             ", identity " + fmt(e3, 12) + ", rotation " + fmt(e4, 12),
         seconds_since(t0));
}

// ---- A8: k-means small-instance optimality ----------------------------------

void a8() {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(9090);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const size_t n = 10, d = 2;
    size_t k = 2 + rng.next_below(2);  // k in {2,3}
    std::vector<double> pts(n * d);
    for (double& v : pts) v = 6.0 * rng.next_double() - 3.0;
    Clustering c = kmeans(pts, n, d, k, 10, 500 + inst);

    // Exhaustive assignment enumeration (k^10 states).
    std::vector<size_t> assign(n, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
      std::vector<double> centers(k * d, 0.0);
      std::vector<size_t> counts(k, 0);
      for (size_t i = 0; i < n; ++i) {
        ++counts[assign[i]];
        for (size_t cc = 0; cc < d; ++cc) {
          centers[assign[i] * d + cc] += pts[i * d + cc];
        }
      }
      bool all = true;
      for (size_t jj = 0; jj < k; ++jj) all = all && counts[jj] > 0;
      if (all) {
        double inertia = 0.0;
        for (size_t jj = 0; jj < k; ++jj) {
          for (size_t cc = 0; cc < d; ++cc) {
            centers[jj * d + cc] /= static_cast<double>(counts[jj]);
          }
        }
        for (size_t i = 0; i < n; ++i) {
          for (size_t cc = 0; cc < d; ++cc) {
            double dv = pts[i * d + cc] - centers[assign[i] * d + cc];
            inertia += dv * dv;
          }
        }
        best = std::min(best, inertia);
      }
      size_t pos = 0;
      while (pos < n && ++assign[pos] == k) {
        assign[pos] = 0;
        ++pos;
      }
      if (pos == n) break;
    }
    worst = std::max(worst, (c.inertia - best) / best);
  }
  report("A8", worst < 1e-12,
         "20 instances, worst rel gap to exhaustive optimum " + fmt(worst, 15),
         seconds_since(t0));
}

// ---- A9: solver order -------------------------------------------------------

void a9() {
  auto t0 = std::chrono::steady_clock::now();
  VelocityModel m = build_model(Arch::MlpMicro, 2, 5);
  double vals = 0.3;
  for (auto& p : m.params) {
    for (double& v : p.value.mutable_data()) {
      v = std::sin(vals) * 1.4;
      vals += 0.7;
    }
  }
  std::vector<double> x0 = {0.2, -0.4};
  Trajectory ref = integrate(m, x0, OdeMethod::Rk4, 4096);
  auto err = [&](OdeMethod method, size_t steps) {
    Trajectory tr = integrate(m, x0, method, steps);
    double dx = tr.endpoint()[0] - ref.endpoint()[0];
    double dy = tr.endpoint()[1] - ref.endpoint()[1];
    return std::sqrt(dx * dx + dy * dy);
  };
  double r1 = err(OdeMethod::Euler, 16) / err(OdeMethod::Euler, 32);
  double r2 = err(OdeMethod::Midpoint, 16) / err(OdeMethod::Midpoint, 32);
  double r4 = err(OdeMethod::Rk4, 8) / err(OdeMethod::Rk4, 16);
  bool pass = std::abs(r1 - 2.0) < 0.4 && std::abs(r2 - 4.0) < 0.8 &&
              std::abs(r4 - 16.0) < 3.2;
  report("A9", pass,
         "halving-step error ratios " + fmt(r1, 2) + "/" + fmt(r2, 2) + "/" +
             fmt(r4, 2) + " (need 2/4/16 within 20%)",
         seconds_since(t0));
}

// ---- A10: determinism -------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void a10(const std::string& store_root) {
  auto t0 = std::chrono::steady_clock::now();
  nlohmann::json j = {
      {"kind", "disjoint-subsets"},
      {"seed", 42},
      {"dataset", {{"name", "two-moons"}, {"n", 1024}}},
      {"train", {{"steps", 400}, {"batch", 64}}},
      {"sampler", {{"method", "midpoint"}, {"steps", 8}, {"pairs", 64}}}};
  ExperimentConfig cfg = ExperimentConfig::from_json(j);

  // Two independent stores: full recomputation both times, bytes must agree.
  std::vector<std::string> bytes;
  for (int run = 0; run < 2; ++run) {
    fs::path root = fs::path(store_root) / ("a10-" + std::to_string(run));
    fs::remove_all(root);
    ExperimentContext ctx(root.string(), 1);
    run_experiment(cfg, ctx);
    fs::path dir = ctx.store.dir_for(cfg.digest());
    bytes.push_back(slurp(dir / "manifest.json") + "\x1e" +
                    slurp(dir / "report.md") + "\x1e" +
                    slurp(dir / "endpoints_a.fmep") + "\x1e" +
                    slurp(dir / "endpoints_b.fmep"));
  }
  bool identical = bytes[0] == bytes[1] && !bytes[0].empty();
  double total = seconds_since(g_suite_start);
  bool pass = identical && total < 25.0 * 60.0;
  report("A10", pass,
         std::string("re-run bytes ") +
             (identical ? "identical" : "DIFFER") + ", suite total " +
             fmt(total / 60.0, 1) + " min (need < 25)",
         seconds_since(t0));
}

}  // namespace

int main() {
  g_suite_start = std::chrono::steady_clock::now();
  fs::path root = fs::temp_directory_path() / "fmlab_acceptance_store";
  fs::remove_all(root);
  ExperimentContext ctx(root.string(), 1);

  a1();
  a2(ctx);
  a3(ctx);
  a4(ctx);
  a5_a6(ctx);
  a7();
  a8();
  a9();
  a10((fs::temp_directory_path() / "fmlab_acceptance_a10").string());

  std::printf("%d/10 criteria passed\n", 10 - g_failures);
  return g_failures;
}
