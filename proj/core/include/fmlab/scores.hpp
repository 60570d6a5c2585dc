#pragma once

// Subset-selection strategies: Random, gradient-norm and loss scoring over
// shared noise paths, and k-means cluster selection with proportional or
// balanced quotas, each with an inverse variant.
//
// Shared paths: one (t_k, x0^(m)) grid, t_k = (k-0.5)/T, is reused for every
// sample, so a score depends only on the sample value, the surrogate, and the
// grid. Raw per-sample magnitudes are normalized per timestep, either by the
// exact mean over (samples × noise) — deterministic and order-independent,
// the default — or by a running EMA updated in (sample-major, noise-minor)
// scan order, which is order-dependent by construction.

#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/dataset.hpp"
#include "fmlab/model.hpp"
#include "fmlab/vendor_json.hpp"

namespace fmlab {

enum class NormalizerMode { ExactMean, RunningEma };

struct ScoreConfig {
  int timesteps = 8;           // T
  int noise_points = 2;        // M
  NormalizerMode normalizer = NormalizerMode::ExactMean;
  double ema_beta = 0.99;
  uint64_t noise_seed = 0;     // seeds the shared x0^(m)
};

struct ScoreTable {
  std::string method;  // "grad" or "loss"
  std::vector<double> scores;
  std::vector<double> t_grid;
  int noise_points = 0;
  uint64_t noise_seed = 0;
  std::string normalizer_mode;
  uint64_t surrogate_digest = 0;
  uint64_t dataset_digest = 0;
};

ScoreTable score_grad(VelocityModel& surrogate, const DatasetBundle& ds,
                      const ScoreConfig& cfg);
ScoreTable score_loss(VelocityModel& surrogate, const DatasetBundle& ds,
                      const ScoreConfig& cfg);

// Normalizer over one stream of values: running EMA (initialized at the first
// value, mu <- beta*mu + (1-beta)*v afterwards) or exact two-pass mean.
double ema_normalizer(const std::vector<double>& values, double beta);
double exact_mean(const std::vector<double>& values);

void save_scores(const ScoreTable& t, const std::string& path);
ScoreTable load_scores(const std::string& path);

// ---- k-means ---------------------------------------------------------------

struct Clustering {
  size_t k = 0;
  size_t dim = 0;
  std::vector<double> centers;     // k × dim
  std::vector<uint32_t> assignment;
  double inertia = 0.0;
  std::string feature_map;
};

// k-means++ seeding, Lloyd iterations to relative inertia change < 1e-8 (or
// 200 iterations), best of `restarts`. Empty clusters are repaired by
// stealing the point currently farthest from its assigned center.
Clustering kmeans(const std::vector<double>& features, size_t n, size_t dim,
                  size_t k, size_t restarts, uint64_t seed);

std::vector<std::pair<size_t, double>> inertia_curve(
    const std::vector<double>& features, size_t n, size_t dim,
    const std::vector<size_t>& k_range, size_t restarts, uint64_t seed);

void export_inertia_csv(const std::vector<std::pair<size_t, double>>& curve,
                        const std::string& path);
void export_clustering_csv(const Clustering& c,
                           const std::vector<double>& features,
                           const std::string& path);

// PCA whitening of raw coordinates; the desk-scale feature map for Clust.
std::vector<double> pca_whiten(const std::vector<double>& x, size_t n,
                               size_t dim);

enum class QuotaMode { Proportional, Balanced };
enum class SelectDirection { Nearest, Furthest };

// Per-cluster keep counts summing exactly to n_keep. Proportional uses
// largest-remainder rounding of n_keep*size_j/N. Balanced gives floor(n/k)
// each, remainder to the largest clusters; quotas capped at cluster size with
// deficits redistributed to the cluster with the most slack (ties: lower
// index).
std::vector<size_t> allocate_quotas(const std::vector<size_t>& cluster_sizes,
                                    size_t n_keep, QuotaMode mode);

// Within each cluster: rank by distance to center, take the quota from the
// nearest or furthest end; ties broken by sample index.
SubsetManifest select_by_center_distance(const DatasetBundle& ds,
                                         const Clustering& c,
                                         const std::vector<double>& features,
                                         const std::vector<size_t>& quotas,
                                         SelectDirection direction, double pr);

// Keep round((1-pr)*N) highest-scored samples (lowest when inverse); stable
// on ties by sample index.
SubsetManifest select_top(const DatasetBundle& ds, const ScoreTable& scores,
                          double pr, bool inverse);

SubsetManifest select_random(const DatasetBundle& ds, double pr, uint64_t seed);

size_t keep_count(size_t n, double pr);

}  // namespace fmlab
