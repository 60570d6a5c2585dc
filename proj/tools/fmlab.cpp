// fmlab command-line front end.
//
// Verbs: dataset gen, train, score, prune, sample, eval, experiment run,
// report. Exit codes: 0 ok, 2 config/schema error, 3 missing upstream
// artifact, 4 training divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fmlab/dataset.hpp"
#include "fmlab/digest.hpp"
#include "fmlab/experiment.hpp"
#include "fmlab/metrics.hpp"
#include "fmlab/model.hpp"
#include "fmlab/prng.hpp"
#include "fmlab/sampler.hpp"
#include "fmlab/scores.hpp"
#include "fmlab/store.hpp"
#include "fmlab/train.hpp"

namespace fs = std::filesystem;
using namespace fmlab;

namespace {

// Missing inputs surface as MissingArtifact naming the verb that produces
// them, per the store contract.
void require_file(const std::string& path, const std::string& producer_verb) {
  if (!fs::exists(path)) {
    throw MissingArtifact("missing artifact " + path + "; produce it with `" +
                          producer_verb + "`");
  }
}

nlohmann::json parse_json_arg(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON for " + what + ": " + e.what());
  }
}

struct Common {
  std::string store_root = "store";
  size_t threads = 1;
  uint64_t seed = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--store", c.store_root, "artifact store root");
  app->add_option("--threads", c.threads, "worker thread count");
  app->add_option("--seed", c.seed, "master seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolVersion) + " - flow-matching laboratory"};
  app.require_subcommand(1);
  Common c;

  // ---- dataset gen ---------------------------------------------------------
  auto* dataset = app.add_subcommand("dataset", "dataset operations");
  dataset->require_subcommand(1);
  auto* gen = dataset->add_subcommand("gen", "generate a synthetic dataset");
  std::string gen_name = "eight-gaussians", gen_params = "{}", gen_out,
              gen_csv;
  size_t gen_n = 8000;
  gen->add_option("--name", gen_name, "family: eight-gaussians, two-moons, checkerboard, two-spirals");
  gen->add_option("--n", gen_n, "sample count");
  gen->add_option("--params", gen_params, "family parameters as JSON");
  gen->add_option("--out", gen_out, "output .fmds path")->required();
  gen->add_option("--csv", gen_csv, "optional CSV export path");
  add_common(gen, c);

  // ---- train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train a velocity model");
  std::string tr_dataset, tr_subset, tr_arch = "mlp-s", tr_out,
              tr_train_json = "{}";
  train->add_option("--dataset", tr_dataset, ".fmds file")->required();
  train->add_option("--subset", tr_subset, "optional .subset.json manifest");
  train->add_option("--arch", tr_arch, "mlp-micro, mlp-s, mlp-xl, resmlp, fourier-mlp");
  train->add_option("--train", tr_train_json,
                    "train config JSON (steps, batch, lr, ...)");
  train->add_option("--out", tr_out, "output .fmck path")->required();
  add_common(train, c);

  // ---- score ---------------------------------------------------------------
  auto* score = app.add_subcommand("score", "per-sample pruning scores");
  std::string sc_dataset, sc_surrogate, sc_method = "grad", sc_out,
              sc_normalizer = "exact-mean";
  int sc_T = 8, sc_M = 2;
  score->add_option("--dataset", sc_dataset, ".fmds file")->required();
  score->add_option("--surrogate", sc_surrogate, "surrogate .fmck")->required();
  score->add_option("--method", sc_method, "grad or loss");
  score->add_option("--timesteps", sc_T, "time grid size T");
  score->add_option("--noise-points", sc_M, "noise points M");
  score->add_option("--normalizer", sc_normalizer, "exact-mean or ema");
  score->add_option("--out", sc_out, "output .fmsc path")->required();
  add_common(score, c);

  // ---- prune ---------------------------------------------------------------
  auto* prune = app.add_subcommand("prune", "select a kept subset");
  std::string pr_dataset, pr_method = "random", pr_scores, pr_out;
  double pr_frac = 0.5;
  size_t pr_k = 8, pr_restarts = 4;
  prune->add_option("--dataset", pr_dataset, ".fmds file")->required();
  prune->add_option("--method", pr_method,
                    "unpruned, random, grad[-inv], loss[-inv], clust-p[-inv], clust-b[-inv]");
  prune->add_option("--pr", pr_frac, "pruning fraction");
  prune->add_option("--scores", pr_scores, ".fmsc file (grad/loss methods)");
  prune->add_option("--k", pr_k, "cluster count (clust methods)");
  prune->add_option("--restarts", pr_restarts, "k-means restarts");
  prune->add_option("--out", pr_out, "output .subset.json path")->required();
  add_common(prune, c);

  // ---- sample --------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "integrate model samples");
  std::string sm_checkpoint, sm_method = "rk4", sm_out;
  size_t sm_count = 512, sm_steps = 64;
  sample->add_option("--checkpoint", sm_checkpoint, ".fmck file")->required();
  sample->add_option("--count", sm_count, "endpoint count");
  sample->add_option("--method", sm_method, "euler, midpoint, rk4");
  sample->add_option("--steps", sm_steps, "integration steps");
  sample->add_option("--out", sm_out, "output .fmep path")->required();
  add_common(sample, c);

  // ---- eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "metrics over endpoint sets");
  std::string ev_dataset, ev_endpoints, ev_paired, ev_out;
  eval_cmd->add_option("--dataset", ev_dataset, ".fmds file")->required();
  eval_cmd->add_option("--endpoints", ev_endpoints, ".fmep file")->required();
  eval_cmd->add_option("--paired", ev_paired,
                       "second .fmep (same bank) for paired similarity");
  eval_cmd->add_option("--out", ev_out, "metrics JSON path (default stdout)");
  add_common(eval_cmd, c);

  // ---- experiment run / report --------------------------------------------
  auto* experiment = app.add_subcommand("experiment", "config-driven runs");
  experiment->require_subcommand(1);
  auto* run = experiment->add_subcommand("run", "run an experiment config");
  std::string ex_config;
  run->add_option("config", ex_config, "experiment config JSON")->required();
  add_common(run, c);

  auto* report = app.add_subcommand("report", "re-emit a stored report");
  std::string rp_config;
  report->add_option("config", rp_config, "experiment config JSON")->required();
  add_common(report, c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      DatasetBundle ds = generate_dataset(gen_name, gen_n,
                                          parse_json_arg(gen_params, "--params"),
                                          derive_stream(c.seed, "dataset"));
      save_dataset(ds, gen_out);
      if (!gen_csv.empty()) export_dataset_csv(ds, gen_csv);
      std::cout << "dataset " << digest_hex(ds.digest()) << " -> " << gen_out
                << "\n";
    } else if (train->parsed()) {
      require_file(tr_dataset, "dataset gen");
      DatasetBundle ds = load_dataset(tr_dataset);
      SubsetManifest subset;
      if (tr_subset.empty()) {
        subset = full_subset(ds);
      } else {
        require_file(tr_subset, "prune");
        subset = load_manifest(tr_subset, ds.digest());
      }
      TrainConfig cfg = train_config_from_json(
          parse_json_arg(tr_train_json, "--train"), derive_stream(c.seed, "train"));
      VelocityModel model = build_model(arch_from_string(tr_arch), ds.dim,
                                        derive_stream(c.seed, "init"));
      TrainTrace trace = train_model(model, ds, subset, cfg);
      save_checkpoint(model, tr_out);
      std::cout << "checkpoint " << digest_hex(model_digest(model)) << " -> "
                << tr_out << " (final loss "
                << (trace.interval_losses.empty() ? 0.0
                                                  : trace.interval_losses.back())
                << ")\n";
    } else if (score->parsed()) {
      require_file(sc_dataset, "dataset gen");
      require_file(sc_surrogate, "train");
      DatasetBundle ds = load_dataset(sc_dataset);
      VelocityModel surrogate = load_checkpoint(sc_surrogate);
      ScoreConfig cfg;
      cfg.timesteps = sc_T;
      cfg.noise_points = sc_M;
      if (sc_normalizer == "ema") {
        cfg.normalizer = NormalizerMode::RunningEma;
      } else if (sc_normalizer != "exact-mean") {
        throw ConfigError("at --normalizer: expected exact-mean or ema, got '" +
                          sc_normalizer + "'");
      }
      cfg.noise_seed = derive_stream(c.seed, "score-noise");
      ScoreTable t = sc_method == "loss" ? score_loss(surrogate, ds, cfg)
                     : sc_method == "grad"
                         ? score_grad(surrogate, ds, cfg)
                         : throw ConfigError(
                               "at --method: expected grad or loss, got '" +
                               sc_method + "'");
      save_scores(t, sc_out);
      std::cout << "scores (" << t.method << ") -> " << sc_out << "\n";
    } else if (prune->parsed()) {
      require_file(pr_dataset, "dataset gen");
      DatasetBundle ds = load_dataset(pr_dataset);
      SubsetManifest subset;
      if (pr_method == "unpruned") {
        subset = full_subset(ds);
      } else if (pr_method == "random") {
        subset = select_random(ds, pr_frac, derive_stream(c.seed, "random/0"));
      } else if (pr_method.rfind("grad", 0) == 0 ||
                 pr_method.rfind("loss", 0) == 0) {
        require_file(pr_scores, "score");
        ScoreTable t = load_scores(pr_scores);
        bool inv = pr_method.size() > 4;
        std::string base = pr_method.substr(0, 4);
        if (t.method != base) {
          throw ConfigError("score file holds '" + t.method +
                            "' scores but method is " + pr_method);
        }
        subset = select_top(ds, t, pr_frac, inv);
        subset.method = pr_method;
      } else if (pr_method.rfind("clust", 0) == 0) {
        std::vector<double> features = pca_whiten(ds.samples, ds.n, ds.dim);
        Clustering cl = kmeans(features, ds.n, ds.dim, pr_k, pr_restarts,
                               derive_stream(c.seed, "kmeans"));
        std::vector<size_t> sizes(cl.k, 0);
        for (uint32_t a : cl.assignment) ++sizes[a];
        QuotaMode qm = pr_method.rfind("clust-b", 0) == 0
                           ? QuotaMode::Balanced
                           : QuotaMode::Proportional;
        SelectDirection dir = pr_method.size() > 7 ? SelectDirection::Furthest
                                                   : SelectDirection::Nearest;
        subset = select_by_center_distance(
            ds, cl, features, allocate_quotas(sizes, keep_count(ds.n, pr_frac), qm),
            dir, pr_frac);
        subset.method = pr_method;
      } else {
        throw ConfigError("at --method: unknown pruning method '" + pr_method +
                          "'");
      }
      save_manifest(subset, pr_out);
      std::cout << "subset " << subset.indices.size() << "/" << ds.n << " -> "
                << pr_out << "\n";
    } else if (sample->parsed()) {
      require_file(sm_checkpoint, "train");
      VelocityModel model = load_checkpoint(sm_checkpoint);
      NoiseBank bank{derive_stream(c.seed, "bank"), model.data_dim};
      std::vector<size_t> idx(sm_count);
      std::iota(idx.begin(), idx.end(), size_t{0});
      Tensor eps = integrate_batch(model, bank.batch(idx),
                                   ode_method_from_string(sm_method), sm_steps);
      save_endpoints(eps, bank.seed, idx, model_digest(model), sm_out);
      std::cout << "endpoints " << sm_count << " -> " << sm_out << "\n";
    } else if (eval_cmd->parsed()) {
      require_file(ev_dataset, "dataset gen");
      require_file(ev_endpoints, "sample");
      DatasetBundle ds = load_dataset(ev_dataset);
      EndpointFile a = load_endpoints(ev_endpoints);
      nlohmann::json out;
      out["frechet"] = frechet_distance(a.endpoints.data(), a.endpoints.rows(),
                                        ds.samples, ds.n, ds.dim);
      if (!ev_paired.empty()) {
        require_file(ev_paired, "sample");
        EndpointFile b = load_endpoints(ev_paired);
        if (b.bank_seed != a.bank_seed || b.indices != a.indices) {
          throw ConfigError("paired endpoint sets use different noise banks");
        }
        out["similarity"] =
            paired_similarity(a.endpoints.data(), b.endpoints.data(),
                              a.endpoints.rows(), ds.dim, {},
                              derive_stream(c.seed, "shuffle"))
                .to_json();
      }
      if (ev_out.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        std::ofstream f(ev_out);
        f << out.dump(2) << "\n";
      }
    } else if (run->parsed()) {
      ExperimentConfig cfg = ExperimentConfig::load(ex_config);
      ExperimentContext ctx(c.store_root, c.threads);
      nlohmann::json manifest = run_experiment(cfg, ctx);
      std::cout << "experiment " << cfg.kind << " "
                << manifest.at("config_digest").get<std::string>() << " -> "
                << ctx.store.dir_for(cfg.digest()) << "\n";
    } else if (report->parsed()) {
      ExperimentConfig cfg = ExperimentConfig::load(rp_config);
      ExperimentContext ctx(c.store_root, c.threads);
      std::cout << render_report(cfg, ctx);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 3;
  } catch (const TrainDivergence& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
