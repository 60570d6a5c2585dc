#include "fmlab/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fmlab/digest.hpp"
#include "fmlab/metrics.hpp"
#include "fmlab/prng.hpp"
#include "fmlab/sampler.hpp"
#include "fmlab/scores.hpp"
#include "fmlab/svg.hpp"
#include "fmlab/threads.hpp"

namespace fs = std::filesystem;

namespace fmlab {

namespace {

// ---- config access with path-carrying errors -------------------------------

const nlohmann::json& field(const nlohmann::json& j, const std::string& path,
                            const std::string& key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError("missing field " + path + "." + key);
  }
  return j.at(key);
}

template <typename T>
T field_as(const nlohmann::json& j, const std::string& path,
           const std::string& key, const char* type_name) {
  const auto& v = field(j, path, key);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("at " + path + "." + key + ": expected " + type_name);
  }
}

template <typename T>
T field_or(const nlohmann::json& j, const std::string& path,
           const std::string& key, const char* type_name, T dflt) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  return field_as<T>(j, path, key, type_name);
}

const std::vector<std::string> kKinds = {"disjoint-subsets", "mode-removal",
                                         "data-swap", "arch-change",
                                         "pruning-sweep"};

}  // namespace

uint64_t ExperimentConfig::digest() const {
  // nlohmann objects keep keys sorted, so dump() is canonical.
  return Digest64().update(raw.dump()).value();
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.kind = field_as<std::string>(j, "$", "kind", "string");
  if (std::find(kKinds.begin(), kKinds.end(), cfg.kind) == kKinds.end()) {
    throw ConfigError("at $.kind: unknown experiment kind '" + cfg.kind + "'");
  }
  field_as<uint64_t>(j, "$", "seed", "integer");
  field(j, "$", "dataset");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

TrainConfig train_config_from_json(const nlohmann::json& j, uint64_t seed) {
  TrainConfig cfg;
  cfg.steps = field_or<uint64_t>(j, "$.train", "steps", "integer", 10000);
  cfg.batch = field_or<size_t>(j, "$.train", "batch", "integer", 256);
  cfg.adam.lr = field_or<double>(j, "$.train", "lr", "number", 1e-3);
  cfg.adam.beta1 = field_or<double>(j, "$.train", "beta1", "number", 0.9);
  cfg.adam.beta2 = field_or<double>(j, "$.train", "beta2", "number", 0.999);
  cfg.adam.eps = field_or<double>(j, "$.train", "eps", "number", 1e-8);
  cfg.surrogate_fraction =
      field_or<double>(j, "$.train", "surrogate_fraction", "number", 0.07);
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

VelocityModel train_cached(ExperimentContext& ctx, const DatasetBundle& ds,
                           const SubsetManifest& subset, Arch arch,
                           const TrainConfig& cfg, const std::string& label,
                           nlohmann::json* record) {
  Digest64 key;
  key.update_value(ds.digest());
  key.update_value(subset.digest());
  key.update(arch_to_string(arch));
  key.update_value(cfg.steps).update_value(cfg.batch);
  key.update_value(cfg.adam.lr).update_value(cfg.adam.beta1);
  key.update_value(cfg.adam.beta2).update_value(cfg.adam.eps);
  key.update_value(cfg.seed);
  uint64_t k = key.value();

  std::string path = ctx.store.ensure(k, "model.fmck", [&](const std::string& p) {
    VelocityModel model =
        build_model(arch, ds.dim, derive_stream(cfg.seed, "init/" + label));
    TrainTrace trace = train_model(model, ds, subset, cfg);
    model.config_digest = k;
    save_checkpoint(model, p);
    std::ofstream tf(ctx.store.path(k, "trace.json"));
    tf << trace.to_json().dump(2) << "\n";
  });
  VelocityModel model = load_checkpoint(path);
  if (record) {
    *record = {{"label", label},
               {"arch", arch_to_string(arch)},
               {"subset_digest", subset.digest()},
               {"checkpoint_digest", model_digest(model)},
               {"train_key", k},
               {"steps", cfg.steps}};
  }
  return model;
}

namespace {

// ---- shared pipeline pieces ------------------------------------------------

struct Pipeline {
  const ExperimentConfig& cfg;
  ExperimentContext& ctx;
  uint64_t master;
  std::string out_dir;
  nlohmann::json manifest;
  nlohmann::json timings;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  Pipeline(const ExperimentConfig& c, ExperimentContext& x)
      : cfg(c), ctx(x), master(c.raw.at("seed").get<uint64_t>()) {
    out_dir = ctx.store.dir_for(cfg.digest());
    fs::create_directories(out_dir);
    manifest["tool_version"] = kToolVersion;
    manifest["kind"] = cfg.kind;
    manifest["config"] = cfg.raw;
    manifest["config_digest"] = digest_hex(cfg.digest());
  }

  DatasetBundle dataset(const char* stream = "dataset",
                        const nlohmann::json* override_params = nullptr) {
    const auto& dj = cfg.raw.at("dataset");
    std::string name = field_as<std::string>(dj, "$.dataset", "name", "string");
    size_t n = field_as<size_t>(dj, "$.dataset", "n", "integer");
    nlohmann::json params =
        dj.contains("params") ? dj.at("params") : nlohmann::json::object();
    if (override_params) {
      for (auto it = override_params->begin(); it != override_params->end();
           ++it) {
        params[it.key()] = it.value();
      }
    }
    return generate_dataset(name, n, params, derive_stream(master, stream));
  }

  TrainConfig train_cfg(const std::string& stream) {
    return train_config_from_json(
        cfg.raw.contains("train") ? cfg.raw.at("train")
                                  : nlohmann::json::object(),
        derive_stream(master, stream));
  }

  OdeMethod sampler_method() {
    return ode_method_from_string(field_or<std::string>(
        cfg.raw.contains("sampler") ? cfg.raw.at("sampler")
                                    : nlohmann::json::object(),
        "$.sampler", "method", "string", std::string("rk4")));
  }
  size_t sampler_steps() {
    return field_or<size_t>(cfg.raw.contains("sampler") ? cfg.raw.at("sampler")
                                                        : nlohmann::json::object(),
                            "$.sampler", "steps", "integer", size_t{64});
  }
  size_t sampler_pairs() {
    return field_or<size_t>(cfg.raw.contains("sampler") ? cfg.raw.at("sampler")
                                                        : nlohmann::json::object(),
                            "$.sampler", "pairs", "integer", size_t{512});
  }

  NoiseBank bank(size_t dim) {
    return NoiseBank{derive_stream(master, "bank"), dim};
  }

  std::vector<size_t> bank_indices(size_t count) {
    std::vector<size_t> idx(count);
    std::iota(idx.begin(), idx.end(), size_t{0});
    return idx;
  }

  void finish(const std::string& report_text) {
    manifest["bank_seed"] = derive_stream(master, "bank");
    {
      std::ofstream f(out_dir + "/manifest.json");
      f << manifest.dump(2) << "\n";
    }
    timings["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    {
      std::ofstream f(out_dir + "/timings.json");
      f << timings.dump(2) << "\n";
    }
    std::ofstream f(out_dir + "/report.md");
    f << report_text;
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

std::string similarity_line(const SimilarityReport& r) {
  return "matched " + fmt(r.matched_mean) + " +/- " + fmt(r.matched_std) +
         ", shuffled " + fmt(r.shuffled_mean) + " +/- " + fmt(r.shuffled_std) +
         " (n=" + std::to_string(r.n_pairs) + ")";
}

SimilarityReport endpoint_similarity(const Tensor& a, const Tensor& b,
                                     uint64_t shuffle_seed) {
  return paired_similarity(a.data(), b.data(), a.rows(), a.cols(), {},
                           shuffle_seed);
}

void overlay_svg(Pipeline& p, const std::string& filename,
                 const std::string& title, const DatasetBundle& ds,
                 const Tensor& ep_a, const Tensor& ep_b) {
  SvgPlot plot;
  plot.set_title(title);
  plot.set_footnote("config " + digest_hex(p.cfg.digest()));
  plot.scatter(ds.samples, ds.n, "#bbbbbb", 1.2, 0.35);
  plot.segments(ep_a.data(), ep_b.data(), ep_a.rows(), "#888888");
  plot.scatter(ep_a.data(), ep_a.rows(), "#1f77b4", 2.2);
  plot.scatter(ep_b.data(), ep_b.rows(), "#d62728", 2.2);
  plot.save(p.out_dir + "/" + filename);
}

// ---- disjoint subsets ------------------------------------------------------

nlohmann::json run_disjoint_subsets(Pipeline& p) {
  DatasetBundle ds = p.dataset();
  auto [half_a, half_b] =
      split_disjoint(ds, 0.5, 0.5, derive_stream(p.master, "split"));
  // Disjointness is structural for split_disjoint; this guards config abuse
  // when halves are supplied externally.
  for (uint32_t i : half_a.indices) {
    if (std::binary_search(half_b.indices.begin(), half_b.indices.end(), i)) {
      throw ConfigError("disjoint-subsets: halves overlap at index " +
                        std::to_string(i));
    }
  }
  p.manifest["dataset_digest"] = ds.digest();

  std::string arch = field_or<std::string>(p.cfg.raw, "$", "arch", "string",
                                           std::string("mlp-s"));
  nlohmann::json rec_a, rec_b;
  VelocityModel models[2];
  const SubsetManifest* halves[2] = {&half_a, &half_b};
  nlohmann::json* recs[2] = {&rec_a, &rec_b};
  const char* labels[2] = {"a", "b"};
  parallel_for(2, p.ctx.threads, [&](size_t i) {
    models[i] = train_cached(p.ctx, ds, *halves[i], arch_from_string(arch),
                             p.train_cfg(std::string("train/") + labels[i]),
                             labels[i], recs[i]);
  });
  p.manifest["models"] = {rec_a, rec_b};

  NoiseBank bank = p.bank(ds.dim);
  auto idx = p.bank_indices(p.sampler_pairs());
  MatchedEndpoints eps = generate_matched({&models[0], &models[1]}, bank, idx,
                                          p.sampler_method(), p.sampler_steps());
  SimilarityReport sim = endpoint_similarity(
      eps.endpoints[0], eps.endpoints[1], derive_stream(p.master, "shuffle"));
  p.manifest["similarity"] = sim.to_json();

  overlay_svg(p, "overlay.svg", "disjoint halves: matched endpoints", ds,
              eps.endpoints[0], eps.endpoints[1]);
  save_endpoints(eps.endpoints[0], bank.seed, idx, eps.model_digests[0],
                 p.out_dir + "/endpoints_a.fmep");
  save_endpoints(eps.endpoints[1], bank.seed, idx, eps.model_digests[1],
                 p.out_dir + "/endpoints_b.fmep");

  std::string report = "# disjoint-subsets\n\nconfig " +
                       digest_hex(p.cfg.digest()) + "\n\n" +
                       similarity_line(sim) + "\n";
  p.finish(report);
  return p.manifest;
}

// ---- mode removal ----------------------------------------------------------

nlohmann::json run_mode_removal(Pipeline& p) {
  DatasetBundle ds = p.dataset();
  auto modes = field_or<std::vector<int32_t>>(p.cfg.raw, "$", "drop_modes",
                                              "array of integers", {});
  SubsetManifest full = full_subset(ds);
  SubsetManifest dropped = modes.empty() ? full : drop_modes(ds, modes);
  p.manifest["dataset_digest"] = ds.digest();
  p.manifest["dropped_modes"] = modes;

  std::string arch = field_or<std::string>(p.cfg.raw, "$", "arch", "string",
                                           std::string("mlp-s"));
  nlohmann::json rec_full, rec_drop;
  VelocityModel model_full, model_drop;
  parallel_for(2, p.ctx.threads, [&](size_t i) {
    if (i == 0) {
      model_full = train_cached(p.ctx, ds, full, arch_from_string(arch),
                                p.train_cfg("train/full"), "full", &rec_full);
    } else {
      model_drop = train_cached(p.ctx, ds, dropped, arch_from_string(arch),
                                p.train_cfg("train/full"), "full", &rec_drop);
    }
  });
  p.manifest["models"] = {rec_full, rec_drop};

  NoiseBank bank = p.bank(ds.dim);
  auto idx = p.bank_indices(p.sampler_pairs());
  MatchedEndpoints eps =
      generate_matched({&model_full, &model_drop}, bank, idx,
                       p.sampler_method(), p.sampler_steps());

  double sigma = ds.params.contains("sigma") ? ds.params.at("sigma").get<double>()
                                             : 0.15;
  double radius = 3.0 * sigma;
  std::vector<double> centers = generator_mode_centers(ds);
  std::vector<int> full_assign = assign_to_centers(
      eps.endpoints[0].data(), idx.size(), centers, 8, ds.dim, radius);

  // Pairs whose full-model endpoint lands in a retained mode.
  std::vector<double> ra, rb;
  for (size_t i = 0; i < idx.size(); ++i) {
    int a = full_assign[i];
    if (a < 0) continue;
    if (std::find(modes.begin(), modes.end(), a) != modes.end()) continue;
    for (size_t c = 0; c < ds.dim; ++c) {
      ra.push_back(eps.endpoints[0].data()[i * ds.dim + c]);
      rb.push_back(eps.endpoints[1].data()[i * ds.dim + c]);
    }
  }
  size_t n_retained = ra.size() / ds.dim;
  SimilarityReport retained_sim = paired_similarity(
      ra, rb, n_retained, ds.dim, {}, derive_stream(p.master, "shuffle"));
  SimilarityReport all_sim = endpoint_similarity(
      eps.endpoints[0], eps.endpoints[1], derive_stream(p.master, "shuffle"));
  ModeCoverage coverage = mode_coverage(eps.endpoints[1].data(), idx.size(),
                                        centers, 8, ds.dim, radius);

  p.manifest["retained_similarity"] = retained_sim.to_json();
  p.manifest["all_similarity"] = all_sim.to_json();
  p.manifest["pruned_model_coverage"] = coverage.to_json();
  p.manifest["coverage_radius"] = radius;

  overlay_svg(p, "overlay.svg", "mode removal: matched endpoints", ds,
              eps.endpoints[0], eps.endpoints[1]);

  std::string report = "# mode-removal\n\nconfig " + digest_hex(p.cfg.digest()) +
                       "\n\nretained-mode pairs: " +
                       similarity_line(retained_sim) + "\nall pairs: " +
                       similarity_line(all_sim) + "\ncoverage: " +
                       coverage.to_json().dump() + "\n";
  p.finish(report);
  return p.manifest;
}

// ---- data swap -------------------------------------------------------------

nlohmann::json run_data_swap(Pipeline& p) {
  DatasetBundle ds_a = p.dataset();
  nlohmann::json swap_params =
      p.cfg.raw.contains("swap")
          ? field_or<nlohmann::json>(p.cfg.raw.at("swap"), "$.swap", "params",
                                     "object", nlohmann::json::object())
          : nlohmann::json::object();
  std::string swap_name = field_or<std::string>(
      p.cfg.raw.contains("swap") ? p.cfg.raw.at("swap") : nlohmann::json::object(),
      "$.swap", "name", "string", std::string());
  DatasetBundle ds_b;
  if (swap_name.empty() || swap_name == ds_a.name) {
    ds_b = p.dataset("dataset-b", &swap_params);
  } else {
    const auto& dj = p.cfg.raw.at("dataset");
    size_t n = field_as<size_t>(dj, "$.dataset", "n", "integer");
    ds_b = generate_dataset(swap_name, n, swap_params,
                            derive_stream(p.master, "dataset-b"));
  }
  p.manifest["dataset_a_digest"] = ds_a.digest();
  p.manifest["dataset_b_digest"] = ds_b.digest();

  std::string arch = field_or<std::string>(p.cfg.raw, "$", "arch", "string",
                                           std::string("mlp-s"));
  SubsetManifest full_a = full_subset(ds_a), full_b = full_subset(ds_b);
  nlohmann::json rec_a, rec_b;
  VelocityModel model_a, model_b;
  parallel_for(2, p.ctx.threads, [&](size_t i) {
    if (i == 0) {
      model_a = train_cached(p.ctx, ds_a, full_a, arch_from_string(arch),
                             p.train_cfg("train/full"), "full", &rec_a);
    } else {
      model_b = train_cached(p.ctx, ds_b, full_b, arch_from_string(arch),
                             p.train_cfg("train/full"), "full", &rec_b);
    }
  });
  p.manifest["models"] = {rec_a, rec_b};

  NoiseBank bank = p.bank(ds_a.dim);
  auto idx = p.bank_indices(p.sampler_pairs());
  MatchedEndpoints eps = generate_matched({&model_a, &model_b}, bank, idx,
                                          p.sampler_method(), p.sampler_steps());
  SimilarityReport sim = endpoint_similarity(
      eps.endpoints[0], eps.endpoints[1], derive_stream(p.master, "shuffle"));
  p.manifest["similarity"] = sim.to_json();

  overlay_svg(p, "overlay.svg", "data swap: matched endpoints", ds_a,
              eps.endpoints[0], eps.endpoints[1]);

  std::string report = "# data-swap\n\nconfig " + digest_hex(p.cfg.digest()) +
                       "\n\n" + similarity_line(sim) + "\n";
  p.finish(report);
  return p.manifest;
}

// ---- architecture change ---------------------------------------------------

nlohmann::json run_arch_change(Pipeline& p) {
  DatasetBundle ds = p.dataset();
  auto arch_names = field_or<std::vector<std::string>>(
      p.cfg.raw, "$", "archs", "array of strings",
      {"mlp-xl", "mlp-s", "resmlp"});
  if (arch_names.size() < 2) {
    throw ConfigError("at $.archs: need at least two architectures");
  }
  p.manifest["dataset_digest"] = ds.digest();
  SubsetManifest full = full_subset(ds);

  std::vector<VelocityModel> models(arch_names.size());
  std::vector<nlohmann::json> recs(arch_names.size());
  parallel_for(arch_names.size(), p.ctx.threads, [&](size_t i) {
    // Identical data and training seed across variants; only arch differs.
    models[i] = train_cached(p.ctx, ds, full, arch_from_string(arch_names[i]),
                             p.train_cfg("train/shared"), "shared", &recs[i]);
  });
  p.manifest["models"] = recs;

  NoiseBank bank = p.bank(ds.dim);
  auto idx = p.bank_indices(p.sampler_pairs());
  std::vector<VelocityModel*> ptrs;
  for (auto& m : models) ptrs.push_back(&m);
  MatchedEndpoints eps =
      generate_matched(ptrs, bank, idx, p.sampler_method(), p.sampler_steps());

  nlohmann::json matrix = nlohmann::json::array();
  std::string lines;
  for (size_t i = 0; i < models.size(); ++i) {
    for (size_t j = i + 1; j < models.size(); ++j) {
      SimilarityReport sim =
          endpoint_similarity(eps.endpoints[i], eps.endpoints[j],
                              derive_stream(p.master, "shuffle"));
      matrix.push_back({{"a", arch_names[i]},
                        {"b", arch_names[j]},
                        {"similarity", sim.to_json()}});
      lines += arch_names[i] + " vs " + arch_names[j] + ": " +
               similarity_line(sim) + "\n";
    }
  }
  p.manifest["pairwise_similarity"] = matrix;

  overlay_svg(p, "overlay.svg", "arch change: " + arch_names[0] + " vs " +
                                    arch_names[1],
              ds, eps.endpoints[0], eps.endpoints[1]);

  std::string report = "# arch-change\n\nconfig " + digest_hex(p.cfg.digest()) +
                       "\n\n" + lines;
  p.finish(report);
  return p.manifest;
}

// ---- pruning sweep ---------------------------------------------------------

struct SweepRow {
  std::string method;       // table id, e.g. "clust-b-inv"
  std::string column;       // table heading
  double frechet = 0.0;
  double frechet_std = 0.0;  // only for random (3 seeds)
  SimilarityReport similarity;  // vs unpruned; empty for unpruned itself
  bool has_similarity = false;
  uint64_t subset_digest = 0;
  uint64_t checkpoint_digest = 0;
};

const std::vector<std::pair<std::string, std::string>> kSweepColumns = {
    {"unpruned", "Unpruned"},   {"random", "Random"},
    {"grad", "Grad"},           {"grad-inv", "Grad^-1"},
    {"loss", "Loss"},           {"loss-inv", "Loss^-1"},
    {"clust-p", "Clust_p"},     {"clust-p-inv", "Clust_p^-1"},
    {"clust-b", "Clust_b"},     {"clust-b-inv", "Clust_b^-1"}};

nlohmann::json run_pruning_sweep(Pipeline& p) {
  DatasetBundle ds = p.dataset();
  const auto prune = p.cfg.raw.contains("prune") ? p.cfg.raw.at("prune")
                                                 : nlohmann::json::object();
  double pr = field_or<double>(prune, "$.prune", "pr", "number", 0.5);
  size_t k = field_or<size_t>(prune, "$.prune", "k", "integer", size_t{8});
  size_t restarts =
      field_or<size_t>(prune, "$.prune", "restarts", "integer", size_t{4});
  auto methods = field_or<std::vector<std::string>>(
      prune, "$.prune", "methods", "array of strings", {});
  if (methods.empty()) {
    for (const auto& [id, _] : kSweepColumns) methods.push_back(id);
  }
  size_t n_eval = field_or<size_t>(
      p.cfg.raw.contains("sampler") ? p.cfg.raw.at("sampler")
                                    : nlohmann::json::object(),
      "$.sampler", "eval_samples", "integer", size_t{2048});
  p.manifest["dataset_digest"] = ds.digest();

  // Shared ingredients: surrogate + score tables + clustering, computed once.
  TrainConfig tcfg = p.train_cfg("train/shared");
  SubsetManifest full = full_subset(ds);
  bool needs_scores = false, needs_clusters = false;
  for (const auto& m : methods) {
    if (m.rfind("grad", 0) == 0 || m.rfind("loss", 0) == 0) needs_scores = true;
    if (m.rfind("clust", 0) == 0) needs_clusters = true;
  }

  ScoreTable grad_scores, loss_scores;
  if (needs_scores) {
    TrainConfig scfg = tcfg;
    scfg.seed = derive_stream(p.master, "surrogate");
    VelocityModel surrogate = train_surrogate(ds, full, scfg);
    ScoreConfig sc;
    sc.noise_seed = derive_stream(p.master, "score-noise");
    grad_scores = score_grad(surrogate, ds, sc);
    loss_scores = score_loss(surrogate, ds, sc);
    save_scores(grad_scores, p.out_dir + "/scores_grad.fmsc");
    save_scores(loss_scores, p.out_dir + "/scores_loss.fmsc");
  }

  Clustering clustering;
  std::vector<double> features;
  if (needs_clusters) {
    features = pca_whiten(ds.samples, ds.n, ds.dim);
    clustering = kmeans(features, ds.n, ds.dim, k, restarts,
                        derive_stream(p.master, "kmeans"));
    clustering.feature_map = "pca-whiten";
    export_clustering_csv(clustering, features, p.out_dir + "/clustering.csv");
  }

  auto subset_for = [&](const std::string& method,
                        uint64_t random_seed) -> SubsetManifest {
    if (method == "unpruned") return full;
    if (method == "random") return select_random(ds, pr, random_seed);
    if (method == "grad") return select_top(ds, grad_scores, pr, false);
    if (method == "grad-inv") return select_top(ds, grad_scores, pr, true);
    if (method == "loss") return select_top(ds, loss_scores, pr, false);
    if (method == "loss-inv") return select_top(ds, loss_scores, pr, true);
    size_t n_keep = keep_count(ds.n, pr);
    std::vector<size_t> sizes(clustering.k, 0);
    for (uint32_t a : clustering.assignment) ++sizes[a];
    QuotaMode qmode = method.rfind("clust-b", 0) == 0 ? QuotaMode::Balanced
                                                      : QuotaMode::Proportional;
    SelectDirection dir = method.size() > 7 ? SelectDirection::Furthest
                                            : SelectDirection::Nearest;
    if (method != "clust-p" && method != "clust-p-inv" &&
        method != "clust-b" && method != "clust-b-inv") {
      throw ConfigError("at $.prune.methods: unknown method '" + method + "'");
    }
    auto quotas = allocate_quotas(sizes, n_keep, qmode);
    return select_by_center_distance(ds, clustering, features, quotas, dir, pr);
  };

  // Work units: every method once, random three times.
  struct Unit {
    std::string method;
    int random_idx = -1;
  };
  std::vector<Unit> units;
  for (const auto& m : methods) {
    if (m == "random") {
      for (int i = 0; i < 3; ++i) units.push_back({m, i});
    } else {
      units.push_back({m, -1});
    }
  }

  NoiseBank bank = p.bank(ds.dim);
  auto idx = p.bank_indices(n_eval);
  OdeMethod method = p.sampler_method();
  size_t steps = p.sampler_steps();

  struct UnitResult {
    double frechet = 0.0;
    Tensor endpoints;
    uint64_t subset_digest = 0;
    uint64_t checkpoint_digest = 0;
  };
  std::vector<UnitResult> results(units.size());
  parallel_for(units.size(), p.ctx.threads, [&](size_t u) {
    const Unit& unit = units[u];
    uint64_t rseed = unit.random_idx >= 0
                         ? derive_stream(p.master, "random/" +
                                                       std::to_string(unit.random_idx))
                         : 0;
    SubsetManifest subset = subset_for(unit.method, rseed);
    std::string label = unit.method + (unit.random_idx >= 0
                                           ? "-" + std::to_string(unit.random_idx)
                                           : "");
    VelocityModel model = train_cached(p.ctx, ds, subset, Arch::MlpS, tcfg,
                                       "shared", nullptr);
    Tensor eps = integrate_batch(model, bank.batch(idx), method, steps);
    UnitResult r;
    r.frechet = frechet_distance(eps.data(), eps.rows(), ds.samples, ds.n,
                                 ds.dim);
    r.endpoints = std::move(eps);
    r.subset_digest = subset.digest();
    r.checkpoint_digest = model_digest(model);
    results[u] = std::move(r);
  });

  // Locate the unpruned endpoints for similarity baselines.
  const Tensor* unpruned_eps = nullptr;
  for (size_t u = 0; u < units.size(); ++u) {
    if (units[u].method == "unpruned") unpruned_eps = &results[u].endpoints;
  }

  std::vector<SweepRow> rows;
  for (const auto& [id, column] : kSweepColumns) {
    if (std::find(methods.begin(), methods.end(), id) == methods.end()) continue;
    SweepRow row;
    row.method = id;
    row.column = column;
    if (id == "random") {
      std::vector<double> fids;
      std::vector<const UnitResult*> rs;
      for (size_t u = 0; u < units.size(); ++u) {
        if (units[u].method == "random") {
          fids.push_back(results[u].frechet);
          rs.push_back(&results[u]);
        }
      }
      double mean = std::accumulate(fids.begin(), fids.end(), 0.0) /
                    static_cast<double>(fids.size());
      double var = 0.0;
      for (double f : fids) var += (f - mean) * (f - mean);
      row.frechet = mean;
      row.frechet_std = std::sqrt(var / static_cast<double>(fids.size()));
      row.subset_digest = rs.front()->subset_digest;
      row.checkpoint_digest = rs.front()->checkpoint_digest;
      if (unpruned_eps && id != "unpruned") {
        row.similarity = endpoint_similarity(
            *unpruned_eps, rs.front()->endpoints,
            derive_stream(p.master, "shuffle"));
        row.has_similarity = true;
      }
    } else {
      for (size_t u = 0; u < units.size(); ++u) {
        if (units[u].method != id) continue;
        row.frechet = results[u].frechet;
        row.subset_digest = results[u].subset_digest;
        row.checkpoint_digest = results[u].checkpoint_digest;
        if (unpruned_eps && id != "unpruned") {
          row.similarity = endpoint_similarity(
              *unpruned_eps, results[u].endpoints,
              derive_stream(p.master, "shuffle"));
          row.has_similarity = true;
        }
      }
    }
    rows.push_back(std::move(row));
  }

  // Markdown tables in the fixed column order.
  std::ostringstream md, csv;
  md << "# pruning-sweep\n\nconfig " << digest_hex(p.cfg.digest())
     << "\n\npr = " << pr << "\n\n## Frechet distance vs training data\n\n|";
  for (const auto& r : rows) md << " " << r.column << " |";
  md << "\n|";
  for (size_t i = 0; i < rows.size(); ++i) md << " --- |";
  md << "\n|";
  for (const auto& r : rows) {
    md << " " << fmt(r.frechet);
    if (r.method == "random") md << " +/- " << fmt(r.frechet_std);
    md << " |";
  }
  md << "\n\n## Matched cosine similarity vs Unpruned\n\n|";
  for (const auto& r : rows) {
    if (r.has_similarity) md << " " << r.column << " |";
  }
  md << "\n|";
  for (const auto& r : rows) {
    if (r.has_similarity) md << " --- |";
  }
  md << "\n|";
  for (const auto& r : rows) {
    if (r.has_similarity) {
      md << " " << fmt(r.similarity.matched_mean) << " +/- "
         << fmt(r.similarity.matched_std) << " |";
    }
  }
  md << "\n";

  csv << "method,frechet,frechet_std,matched_mean,matched_std,shuffled_mean,"
         "shuffled_std\n";
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows) {
    csv << r.method << "," << r.frechet << "," << r.frechet_std << ",";
    if (r.has_similarity) {
      csv << r.similarity.matched_mean << "," << r.similarity.matched_std
          << "," << r.similarity.shuffled_mean << ","
          << r.similarity.shuffled_std;
    } else {
      csv << ",,,";
    }
    csv << "\n";
    nlohmann::json jr = {{"method", r.method},
                         {"frechet", r.frechet},
                         {"frechet_std", r.frechet_std},
                         {"subset_digest", r.subset_digest},
                         {"checkpoint_digest", r.checkpoint_digest}};
    if (r.has_similarity) jr["similarity"] = r.similarity.to_json();
    jrows.push_back(jr);
  }
  p.manifest["rows"] = jrows;
  {
    std::ofstream f(p.out_dir + "/sweep.csv");
    f << csv.str();
  }
  p.finish(md.str());
  return p.manifest;
}

}  // namespace

nlohmann::json run_experiment(const ExperimentConfig& cfg,
                              ExperimentContext& ctx) {
  Pipeline p(cfg, ctx);
  if (cfg.kind == "disjoint-subsets") return run_disjoint_subsets(p);
  if (cfg.kind == "mode-removal") return run_mode_removal(p);
  if (cfg.kind == "data-swap") return run_data_swap(p);
  if (cfg.kind == "arch-change") return run_arch_change(p);
  if (cfg.kind == "pruning-sweep") return run_pruning_sweep(p);
  throw ConfigError("unknown experiment kind: " + cfg.kind);
}

std::string render_report(const ExperimentConfig& cfg, ExperimentContext& ctx) {
  std::string path =
      ctx.store.require(cfg.digest(), "report.md", "experiment run");
  std::ifstream f(path);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace fmlab
