#pragma once

// Quantitative stability evaluation: Fréchet distance between Gaussian fits
// of two sample sets, seed-matched pairwise cosine similarity against a
// shuffled (derangement) baseline, and mode-coverage diagnostics.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fmlab/vendor_json.hpp"

namespace fmlab {

// Row-wise feature transform; identity by default. The tag travels with
// every report so numbers from different feature maps are never compared.
struct FeatureMap {
  std::string tag = "identity";
  std::function<std::vector<double>(const std::vector<double>&, size_t n,
                                    size_t d)>
      apply;  // null = identity

  std::vector<double> operator()(const std::vector<double>& x, size_t n,
                                 size_t d) const {
    return apply ? apply(x, n, d) : x;
  }
};

struct GaussianFit {
  std::vector<double> mean;
  std::vector<double> cov;  // d×d, symmetric
  size_t d = 0;
  size_t n = 0;
};

GaussianFit fit_gaussian(const std::vector<double>& x, size_t n, size_t d);

// d^2 = |mu_A - mu_B|^2 + tr(S_A + S_B - 2 (S_A^1/2 S_B S_A^1/2)^1/2).
// Matrix roots via symmetric eigendecomposition with negative eigenvalues
// clamped to zero, so rank-deficient covariances need no regularization; a
// 1e-10 jitter retry happens only if the result comes out non-finite
// (recorded via the optional flag). Result clamped to >= 0.
double frechet_distance(const std::vector<double>& set_a, size_t na,
                        const std::vector<double>& set_b, size_t nb, size_t d,
                        const FeatureMap& fmap = {}, bool* jittered = nullptr);

struct SimilarityReport {
  double matched_mean = 0.0;
  double matched_std = 0.0;
  double shuffled_mean = 0.0;
  double shuffled_std = 0.0;
  size_t n_pairs = 0;
  size_t skipped = 0;
  std::string feature_map;
  uint64_t shuffle_seed = 0;

  nlohmann::json to_json() const;
};

// Cosine similarity over pairs (a_i, b_i) aligned by noise seed, plus a
// baseline over a seed-fixed derangement of B (no element compares with its
// own partner). Pairs with a zero feature vector are skipped and counted;
// more than 1% skips is an error.
SimilarityReport paired_similarity(const std::vector<double>& a,
                                   const std::vector<double>& b, size_t n,
                                   size_t d, const FeatureMap& fmap,
                                   uint64_t shuffle_seed);

struct ModeCoverage {
  std::vector<size_t> counts;  // per center
  size_t orphans = 0;
  size_t total = 0;

  double orphan_fraction() const {
    return total ? static_cast<double>(orphans) / static_cast<double>(total)
                 : 0.0;
  }
  nlohmann::json to_json() const;
};

// Assigns each endpoint to its nearest center when within `radius`, else
// counts it as an orphan.
ModeCoverage mode_coverage(const std::vector<double>& endpoints, size_t n,
                           const std::vector<double>& centers, size_t k,
                           size_t d, double radius);

// Per-endpoint nearest-center assignment within `radius`; -1 for orphans.
std::vector<int> assign_to_centers(const std::vector<double>& endpoints,
                                   size_t n, const std::vector<double>& centers,
                                   size_t k, size_t d, double radius);

}  // namespace fmlab
