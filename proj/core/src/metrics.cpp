#include "fmlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fmlab/linalg.hpp"
#include "fmlab/prng.hpp"

namespace fmlab {

GaussianFit fit_gaussian(const std::vector<double>& x, size_t n, size_t d) {
  if (n <= d) {
    throw std::invalid_argument(
        "fit_gaussian: need more samples than dimensions (" +
        std::to_string(n) + " <= " + std::to_string(d) + ")");
  }
  GaussianFit fit;
  fit.d = d;
  fit.n = n;
  mean_cov(x, n, d, fit.mean, fit.cov);
  return fit;
}

namespace {

// Symmetric PSD square root with negative eigenvalues clamped to zero.
std::vector<double> sqrtm_psd(const std::vector<double>& a, size_t d) {
  EigenSym e = eigh(a, d);
  std::vector<double> out(d * d, 0.0);
  for (size_t j = 0; j < d; ++j) {
    double r = std::sqrt(std::max(e.values[j], 0.0));
    for (size_t i = 0; i < d; ++i) {
      for (size_t k = 0; k < d; ++k) {
        out[i * d + k] += e.vectors[i * d + j] * r * e.vectors[k * d + j];
      }
    }
  }
  return out;
}

double frechet_from_fits(const GaussianFit& a, const GaussianFit& b, size_t d) {
  double mean_term = 0.0;
  for (size_t c = 0; c < d; ++c) {
    double diff = a.mean[c] - b.mean[c];
    mean_term += diff * diff;
  }
  double trace_ab = 0.0;
  for (size_t c = 0; c < d; ++c) {
    trace_ab += a.cov[c * d + c] + b.cov[c * d + c];
  }
  std::vector<double> ra = sqrtm_psd(a.cov, d);
  std::vector<double> inner = matmul_sq(matmul_sq(ra, b.cov, d), ra, d);
  EigenSym e = eigh(inner, d);
  double trace_cross = 0.0;
  for (double v : e.values) trace_cross += std::sqrt(std::max(v, 0.0));
  return mean_term + trace_ab - 2.0 * trace_cross;
}

}  // namespace

double frechet_distance(const std::vector<double>& set_a, size_t na,
                        const std::vector<double>& set_b, size_t nb, size_t d,
                        const FeatureMap& fmap, bool* jittered) {
  std::vector<double> fa = fmap(set_a, na, d);
  std::vector<double> fb = fmap(set_b, nb, d);
  GaussianFit a = fit_gaussian(fa, na, d);
  GaussianFit b = fit_gaussian(fb, nb, d);

  // Rank-deficient covariances are fine for the clamped-eigenvalue square
  // root, so jitter is a last-resort fallback for a non-finite result only;
  // applying it eagerly would cost ~1e-5 of accuracy in the result.
  if (jittered) *jittered = false;
  double v = frechet_from_fits(a, b, d);
  if (!std::isfinite(v)) {
    for (size_t i = 0; i < d; ++i) {
      a.cov[i * d + i] += 1e-10;
      b.cov[i * d + i] += 1e-10;
    }
    if (jittered) *jittered = true;
    v = frechet_from_fits(a, b, d);
  }
  return std::max(v, 0.0);
}

nlohmann::json SimilarityReport::to_json() const {
  return {{"matched_mean", matched_mean},   {"matched_std", matched_std},
          {"shuffled_mean", shuffled_mean}, {"shuffled_std", shuffled_std},
          {"n_pairs", n_pairs},             {"skipped", skipped},
          {"feature_map", feature_map},     {"shuffle_seed", shuffle_seed}};
}

namespace {

double cosine(const double* a, const double* b, size_t d, bool& zero) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (size_t c = 0; c < d; ++c) {
    ab += a[c] * b[c];
    aa += a[c] * a[c];
    bb += b[c] * b[c];
  }
  if (aa == 0.0 || bb == 0.0) {
    zero = true;
    return 0.0;
  }
  zero = false;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  sd = std::sqrt(acc / static_cast<double>(v.size()));
}

// Seed-fixed derangement: Fisher-Yates permutation, then fixed points are
// repaired by swapping with the next position (cyclically).
std::vector<size_t> derangement(size_t n, uint64_t seed) {
  std::vector<size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  Rng rng(derive_stream(seed, "derangement"));
  for (size_t i = n - 1; i > 0; --i) {
    size_t j = rng.next_below(i + 1);
    std::swap(p[i], p[j]);
  }
  for (size_t i = 0; i < n; ++i) {
    if (p[i] == i) std::swap(p[i], p[(i + 1) % n]);
  }
  return p;
}

}  // namespace

SimilarityReport paired_similarity(const std::vector<double>& a,
                                   const std::vector<double>& b, size_t n,
                                   size_t d, const FeatureMap& fmap,
                                   uint64_t shuffle_seed) {
  if (n < 2) throw std::invalid_argument("paired_similarity: need >= 2 pairs");
  if (a.size() != n * d || b.size() != n * d) {
    throw std::invalid_argument("paired_similarity: size mismatch");
  }
  std::vector<double> fa = fmap(a, n, d);
  std::vector<double> fb = fmap(b, n, d);

  SimilarityReport rep;
  rep.feature_map = fmap.tag;
  rep.shuffle_seed = shuffle_seed;

  std::vector<double> matched;
  size_t skipped = 0;
  for (size_t i = 0; i < n; ++i) {
    bool zero = false;
    double s = cosine(fa.data() + i * d, fb.data() + i * d, d, zero);
    if (zero) {
      ++skipped;
    } else {
      matched.push_back(s);
    }
  }
  if (static_cast<double>(skipped) > 0.01 * static_cast<double>(n)) {
    throw std::runtime_error("paired_similarity: more than 1% zero-feature pairs (" +
                             std::to_string(skipped) + " of " +
                             std::to_string(n) + ")");
  }
  std::vector<size_t> perm = derangement(n, shuffle_seed);
  std::vector<double> shuffled;
  for (size_t i = 0; i < n; ++i) {
    bool zero = false;
    double s = cosine(fa.data() + i * d, fb.data() + perm[i] * d, d, zero);
    if (!zero) shuffled.push_back(s);
  }
  rep.n_pairs = matched.size();
  rep.skipped = skipped;
  mean_std(matched, rep.matched_mean, rep.matched_std);
  mean_std(shuffled, rep.shuffled_mean, rep.shuffled_std);
  return rep;
}

nlohmann::json ModeCoverage::to_json() const {
  return {{"counts", counts},
          {"orphans", orphans},
          {"total", total},
          {"orphan_fraction", orphan_fraction()}};
}

std::vector<int> assign_to_centers(const std::vector<double>& endpoints,
                                   size_t n, const std::vector<double>& centers,
                                   size_t k, size_t d, double radius) {
  if (radius <= 0.0) {
    throw std::invalid_argument("assign_to_centers: radius must be positive");
  }
  std::vector<int> out(n, -1);
  double r2 = radius * radius;
  for (size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    size_t bj = 0;
    for (size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (size_t c = 0; c < d; ++c) {
        double diff = endpoints[i * d + c] - centers[j * d + c];
        s += diff * diff;
      }
      if (s < best) {
        best = s;
        bj = j;
      }
    }
    if (best <= r2) out[i] = static_cast<int>(bj);
  }
  return out;
}

ModeCoverage mode_coverage(const std::vector<double>& endpoints, size_t n,
                           const std::vector<double>& centers, size_t k,
                           size_t d, double radius) {
  std::vector<int> assign = assign_to_centers(endpoints, n, centers, k, d, radius);
  ModeCoverage cov;
  cov.counts.assign(k, 0);
  cov.total = n;
  for (int a : assign) {
    if (a < 0) {
      ++cov.orphans;
    } else {
      ++cov.counts[static_cast<size_t>(a)];
    }
  }
  return cov;
}

}  // namespace fmlab
