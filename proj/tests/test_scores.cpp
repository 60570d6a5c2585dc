#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "fmlab/prng.hpp"
#include "fmlab/scores.hpp"
#include "fmlab/train.hpp"

using namespace fmlab;

TEST_CASE("ema normalizer worked example and exact mean") {
  // First value initializes mu; the second gives 0.99*1 + 0.01*2 = 1.01.
  CHECK(ema_normalizer({1.0, 2.0}, 0.99) == doctest::Approx(1.01).epsilon(1e-15));
  CHECK(exact_mean({1.0, 2.0, 3.0}) == doctest::Approx(2.0));
}

TEST_CASE("exact-mean normalized scores average to one") {
  DatasetBundle ds = generate_dataset("two-moons", 64, {}, 5);
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.batch = 16;
  cfg.seed = 2;
  VelocityModel surrogate = train_surrogate(ds, full_subset(ds), cfg);
  ScoreConfig sc;
  sc.noise_seed = 77;
  for (bool grad : {true, false}) {
    ScoreTable t = grad ? score_grad(surrogate, ds, sc)
                        : score_loss(surrogate, ds, sc);
    double mean = std::accumulate(t.scores.begin(), t.scores.end(), 0.0) /
                  static_cast<double>(t.scores.size());
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.t_grid.size() == 8);
    CHECK(t.t_grid[0] == doctest::Approx(0.0625));
    CHECK(t.t_grid[7] == doctest::Approx(0.9375));
  }
}

TEST_CASE("scores are deterministic and depend on the noise seed") {
  DatasetBundle ds = generate_dataset("two-moons", 32, {}, 9);
  TrainConfig cfg;
  cfg.steps = 40;
  cfg.batch = 8;
  cfg.seed = 3;
  VelocityModel surrogate = train_surrogate(ds, full_subset(ds), cfg);
  ScoreConfig sc;
  sc.noise_seed = 10;
  ScoreTable a = score_grad(surrogate, ds, sc);
  ScoreTable b = score_grad(surrogate, ds, sc);
  CHECK(a.scores == b.scores);
  sc.noise_seed = 11;
  ScoreTable c = score_grad(surrogate, ds, sc);
  CHECK(a.scores != c.scores);
}

TEST_CASE("score table file roundtrip") {
  const char* path = "test_scores_tmp.fmsc";
  DatasetBundle ds = generate_dataset("two-moons", 16, {}, 1);
  TrainConfig cfg;
  cfg.steps = 10;
  cfg.batch = 8;
  VelocityModel surrogate = train_surrogate(ds, full_subset(ds), cfg);
  ScoreConfig sc;
  sc.noise_seed = 4;
  ScoreTable t = score_loss(surrogate, ds, sc);
  save_scores(t, path);
  ScoreTable back = load_scores(path);
  CHECK(back.scores == t.scores);
  CHECK(back.method == "loss");
  CHECK(back.noise_seed == 4);
  CHECK(back.normalizer_mode == "exact-mean");
  std::remove(path);
}

// ---- k-means ---------------------------------------------------------------

TEST_CASE("kmeans 1-D hand instance matches the exhaustive optimum") {
  std::vector<double> pts = {0.0, 0.1, 10.0, 10.1};
  Clustering c = kmeans(pts, 4, 1, 2, 4, 12);
  std::vector<double> centers = c.centers;
  std::sort(centers.begin(), centers.end());
  CHECK(centers[0] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(centers[1] == doctest::Approx(10.05).epsilon(1e-12));
  CHECK(c.inertia == doctest::Approx(0.01).epsilon(1e-10));
  CHECK(c.assignment[0] == c.assignment[1]);
  CHECK(c.assignment[2] == c.assignment[3]);
  CHECK(c.assignment[0] != c.assignment[2]);
}

namespace {

// Exhaustive k-partition optimum by assignment enumeration (k^n states).
double brute_force_inertia(const std::vector<double>& pts, size_t n, size_t d,
                           size_t k) {
  std::vector<size_t> assign(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<double> centers(k * d, 0.0);
    std::vector<size_t> counts(k, 0);
    for (size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (size_t c = 0; c < d; ++c) {
        centers[assign[i] * d + c] += pts[i * d + c];
      }
    }
    bool ok = true;
    for (size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) ok = false;
    }
    if (ok) {
      for (size_t j = 0; j < k; ++j) {
        for (size_t c = 0; c < d; ++c) {
          centers[j * d + c] /= static_cast<double>(counts[j]);
        }
      }
      double inertia = 0.0;
      for (size_t i = 0; i < n; ++i) {
        for (size_t c = 0; c < d; ++c) {
          double dv = pts[i * d + c] - centers[assign[i] * d + c];
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
  return best;
}

}  // namespace

TEST_CASE("kmeans reaches the exhaustive optimum on small instances") {
  Rng rng(31);
  for (int inst = 0; inst < 8; ++inst) {
    size_t n = 8, k = 2 + rng.next_below(2);
    std::vector<double> pts(n * 2);
    for (double& v : pts) v = 4.0 * rng.next_double() - 2.0;
    Clustering c = kmeans(pts, n, 2, k, 10, 100 + inst);
    double opt = brute_force_inertia(pts, n, 2, k);
    CHECK(c.inertia == doctest::Approx(opt).epsilon(1e-9));
  }
}

TEST_CASE("kmeans handles duplicates and k near n") {
  std::vector<double> pts = {1.0, 1.0, 1.0, 2.0};
  Clustering c = kmeans(pts, 4, 1, 2, 4, 3);
  CHECK(c.inertia == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS(kmeans(pts, 4, 1, 5, 2, 3));  // k > n
}

TEST_CASE("pca whitening yields zero mean and unit covariance") {
  Rng rng(8);
  size_t n = 500;
  std::vector<double> pts(n * 2);
  for (size_t i = 0; i < n; ++i) {
    double a = rng.next_gaussian(), b = rng.next_gaussian();
    pts[2 * i] = 3.0 * a + 5.0;
    pts[2 * i + 1] = 0.5 * a + 0.2 * b - 1.0;  // correlated, anisotropic
  }
  std::vector<double> w = pca_whiten(pts, n, 2);
  double m0 = 0, m1 = 0, c00 = 0, c01 = 0, c11 = 0;
  for (size_t i = 0; i < n; ++i) {
    m0 += w[2 * i];
    m1 += w[2 * i + 1];
  }
  m0 /= n;
  m1 /= n;
  for (size_t i = 0; i < n; ++i) {
    double a = w[2 * i] - m0, b = w[2 * i + 1] - m1;
    c00 += a * a;
    c01 += a * b;
    c11 += b * b;
  }
  CHECK(std::abs(m0) < 1e-9);
  CHECK(std::abs(m1) < 1e-9);
  CHECK(c00 / n == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(c11 / n == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(c01 / n) < 1e-6);
}

// ---- quotas and selection --------------------------------------------------

TEST_CASE("quota allocation worked example and invariants") {
  // Balanced on sizes [1,5,5], keep 6: base 2 each, cluster 0 capped at 1,
  // deficit goes to the largest-slack cluster (ties: lower index).
  CHECK(allocate_quotas({1, 5, 5}, 6, QuotaMode::Balanced) ==
        std::vector<size_t>{1, 3, 2});
  // Proportional largest remainder.
  CHECK(allocate_quotas({10, 10, 20}, 20, QuotaMode::Proportional) ==
        std::vector<size_t>{5, 5, 10});
  CHECK(allocate_quotas({1, 1, 1}, 2, QuotaMode::Proportional) ==
        std::vector<size_t>{1, 1, 0});

  Rng rng(55);
  for (int iter = 0; iter < 50; ++iter) {
    size_t k = 2 + rng.next_below(5);
    std::vector<size_t> sizes(k);
    size_t total = 0;
    for (auto& s : sizes) {
      s = 1 + rng.next_below(20);
      total += s;
    }
    size_t keep = 1 + rng.next_below(total);
    for (QuotaMode mode : {QuotaMode::Proportional, QuotaMode::Balanced}) {
      auto q = allocate_quotas(sizes, keep, mode);
      size_t sum = 0;
      for (size_t j = 0; j < k; ++j) {
        CHECK(q[j] <= sizes[j]);
        sum += q[j];
      }
      CHECK(sum == keep);
    }
  }
}

TEST_CASE("select_top keeps round((1-pr)N) extremal scores, ties by index") {
  DatasetBundle ds = generate_dataset("two-moons", 10, {}, 3);
  ScoreTable t;
  t.method = "grad";
  t.dataset_digest = ds.digest();
  t.scores = {5, 1, 5, 2, 9, 0, 9, 2, 7, 3};
  SubsetManifest top = select_top(ds, t, 0.5, false);
  CHECK(top.indices == std::vector<uint32_t>{0, 2, 4, 6, 8});
  SubsetManifest bottom = select_top(ds, t, 0.5, true);
  CHECK(bottom.indices == std::vector<uint32_t>{1, 3, 5, 7, 9});
  CHECK(top.pr == 0.5);
  CHECK(top.method == "grad");
  CHECK(bottom.method == "grad-inv");

  // round-half-up keep count: N=5, pr=0.5 -> keep 3.
  CHECK(keep_count(5, 0.5) == 3);
  CHECK(keep_count(8000, 0.5) == 4000);
}

TEST_CASE("select_random is a sorted unique sample of the right size") {
  DatasetBundle ds = generate_dataset("eight-gaussians", 100, {}, 6);
  SubsetManifest a = select_random(ds, 0.3, 17);
  CHECK(a.indices.size() == 70);
  CHECK(std::is_sorted(a.indices.begin(), a.indices.end()));
  CHECK(std::set<uint32_t>(a.indices.begin(), a.indices.end()).size() == 70);
  CHECK(select_random(ds, 0.3, 17).indices == a.indices);
  CHECK(select_random(ds, 0.3, 18).indices != a.indices);
}

TEST_CASE("center-distance selection honors quotas and direction") {
  // 1-D points: cluster 0 at {0, 1, 2}, cluster 1 at {10, 11}.
  DatasetBundle ds = generate_dataset("two-moons", 5, {}, 2);
  std::vector<double> features = {0.0, 1.0, 2.0, 10.0, 11.0};
  Clustering c;
  c.k = 2;
  c.dim = 1;
  c.centers = {1.0, 10.5};
  c.assignment = {0, 0, 0, 1, 1};
  c.inertia = 2.5;
  SubsetManifest near =
      select_by_center_distance(ds, c, features, {2, 1}, SelectDirection::Nearest,
                                0.4);
  // Nearest in cluster 0: index 1 (dist 0), tie between 0 and 2 (dist 1) ->
  // lower index 0. Cluster 1: tie at dist 0.5 -> index 3.
  CHECK(near.indices == std::vector<uint32_t>{0, 1, 3});
  SubsetManifest far =
      select_by_center_distance(ds, c, features, {2, 1},
                                SelectDirection::Furthest, 0.4);
  CHECK(far.indices == std::vector<uint32_t>{0, 2, 3});
}
