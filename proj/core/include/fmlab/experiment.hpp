#pragma once

// Config-driven experiment orchestration. A config JSON fully determines an
// experiment; its canonical-form digest content-addresses every derived
// artifact, so re-running reuses whatever already exists and reproduces
// byte-identical manifests and metric files.
//
// Experiment kinds: disjoint-subsets, mode-removal, data-swap, arch-change,
// pruning-sweep. Master seed -> named child streams (dataset, split, init,
// train, bank, shuffle, ...) via derive_stream(), so models under comparison
// never share an RNG stream by accident.

#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/dataset.hpp"
#include "fmlab/model.hpp"
#include "fmlab/store.hpp"
#include "fmlab/train.hpp"
#include "fmlab/vendor_json.hpp"

namespace fmlab {

inline constexpr const char* kToolVersion = "fmlab 0.1.0";

// Thrown for schema violations; message carries JSON path and expected type.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
  std::string kind;
  nlohmann::json raw;

  // Digest of the canonical serialization (keys sorted), so it is stable
  // under key reordering in the source file.
  uint64_t digest() const;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
};

struct ExperimentContext {
  ArtifactStore store;
  size_t threads = 1;

  explicit ExperimentContext(const std::string& store_root, size_t nthreads = 1)
      : store(store_root), threads(nthreads) {}
};

// Runs the experiment, writing all artifacts and reports under
// store/<config digest>/. Returns the run manifest (also written as
// manifest.json; wall-times go to the non-deterministic timings.json sidecar
// so the manifest stays byte-stable across runs).
nlohmann::json run_experiment(const ExperimentConfig& cfg,
                              ExperimentContext& ctx);

// Re-emits the human-readable report for an experiment that has already run.
// Throws MissingArtifact if the manifest is absent.
std::string render_report(const ExperimentConfig& cfg, ExperimentContext& ctx);

// ---- helpers shared with the CLI ------------------------------------------

TrainConfig train_config_from_json(const nlohmann::json& j, uint64_t seed);

// Cached training: checkpoint keyed by the digest of (dataset, subset, arch,
// train config, seed). Reuses the stored checkpoint when present.
VelocityModel train_cached(ExperimentContext& ctx, const DatasetBundle& ds,
                           const SubsetManifest& subset, Arch arch,
                           const TrainConfig& cfg, const std::string& label,
                           nlohmann::json* record = nullptr);

}  // namespace fmlab
