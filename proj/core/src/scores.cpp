#include "fmlab/scores.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fmlab/container.hpp"
#include "fmlab/linalg.hpp"
#include "fmlab/prng.hpp"
#include "fmlab/train.hpp"

namespace fmlab {

namespace {

std::vector<double> midpoint_grid(int timesteps) {
  std::vector<double> t(timesteps);
  for (int k = 0; k < timesteps; ++k) {
    t[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(timesteps);
  }
  return t;
}

// Raw per-(sample, timestep, noise) magnitudes, layout [i][k][m]. use_grad
// selects the squared parameter-gradient norm, otherwise the loss itself.
std::vector<double> raw_magnitudes(VelocityModel& surrogate,
                                   const DatasetBundle& ds,
                                   const ScoreConfig& cfg, bool use_grad) {
  if (cfg.timesteps < 1 || cfg.noise_points < 1) {
    throw std::invalid_argument("score: T and M must be >= 1");
  }
  const size_t n = ds.n, d = ds.dim;
  const size_t T = static_cast<size_t>(cfg.timesteps);
  const size_t M = static_cast<size_t>(cfg.noise_points);
  const auto t_grid = midpoint_grid(cfg.timesteps);
  // Shared noise endpoints x0^(m), identical for every sample.
  std::vector<double> noise(M * d);
  for (size_t m = 0; m < M; ++m) {
    for (size_t c = 0; c < d; ++c) {
      noise[m * d + c] = counter_gaussian(cfg.noise_seed, m, c);
    }
  }
  std::vector<double> raw(n * T * M);
  for (size_t i = 0; i < n; ++i) {
    Tensor x1({1, d},
              std::vector<double>(ds.sample(i), ds.sample(i) + d));
    for (size_t k = 0; k < T; ++k) {
      Tensor t({1}, {t_grid[k]});
      for (size_t m = 0; m < M; ++m) {
        Tensor x0({1, d}, std::vector<double>(noise.begin() + m * d,
                                              noise.begin() + (m + 1) * d));
        if (use_grad) {
          Tape tape;
          Tensor loss = fm_loss(surrogate, x1, x0, t, &tape);
          tape.backward(loss);
          std::vector<std::vector<double>> grads;
          for (int node : surrogate.param_nodes()) {
            grads.push_back(tape.grad(node));
          }
          surrogate.detach_params();
          raw[(i * T + k) * M + m] = grad_sq_norm(grads);
        } else {
          raw[(i * T + k) * M + m] = fm_loss(surrogate, x1, x0, t).item();
        }
      }
    }
  }
  return raw;
}

ScoreTable score_impl(VelocityModel& surrogate, const DatasetBundle& ds,
                      const ScoreConfig& cfg, bool use_grad) {
  const size_t n = ds.n;
  const size_t T = static_cast<size_t>(cfg.timesteps);
  const size_t M = static_cast<size_t>(cfg.noise_points);
  std::vector<double> raw = raw_magnitudes(surrogate, ds, cfg, use_grad);

  std::vector<double> scores(n, 0.0);
  for (size_t k = 0; k < T; ++k) {
    if (cfg.normalizer == NormalizerMode::ExactMean) {
      double mu = 0.0;
      for (size_t i = 0; i < n; ++i) {
        for (size_t m = 0; m < M; ++m) mu += raw[(i * T + k) * M + m];
      }
      mu /= static_cast<double>(n * M);
      if (mu == 0.0) mu = 1.0;  // all-zero stream: pass raw values through
      for (size_t i = 0; i < n; ++i) {
        for (size_t m = 0; m < M; ++m) {
          scores[i] += raw[(i * T + k) * M + m] / mu;
        }
      }
    } else {
      // Running EMA, updated inside the (sample-major, noise-minor) scan;
      // each term is divided by the EMA value after its own update.
      double mu = 0.0;
      bool first = true;
      for (size_t i = 0; i < n; ++i) {
        for (size_t m = 0; m < M; ++m) {
          double v = raw[(i * T + k) * M + m];
          mu = first ? v : cfg.ema_beta * mu + (1.0 - cfg.ema_beta) * v;
          first = false;
          scores[i] += v / (mu == 0.0 ? 1.0 : mu);
        }
      }
    }
  }
  double norm = 1.0 / static_cast<double>(T * M);
  for (double& s : scores) s *= norm;

  ScoreTable table;
  table.method = use_grad ? "grad" : "loss";
  table.scores = std::move(scores);
  table.t_grid = midpoint_grid(cfg.timesteps);
  table.noise_points = cfg.noise_points;
  table.noise_seed = cfg.noise_seed;
  table.normalizer_mode =
      cfg.normalizer == NormalizerMode::ExactMean ? "exact-mean" : "running-ema";
  table.surrogate_digest = model_digest(surrogate);
  table.dataset_digest = ds.digest();
  return table;
}

}  // namespace

ScoreTable score_grad(VelocityModel& surrogate, const DatasetBundle& ds,
                      const ScoreConfig& cfg) {
  return score_impl(surrogate, ds, cfg, true);
}

ScoreTable score_loss(VelocityModel& surrogate, const DatasetBundle& ds,
                      const ScoreConfig& cfg) {
  return score_impl(surrogate, ds, cfg, false);
}

double ema_normalizer(const std::vector<double>& values, double beta) {
  if (values.empty()) throw std::invalid_argument("ema_normalizer: empty stream");
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("ema_normalizer: beta must be in (0,1)");
  }
  double mu = values[0];
  for (size_t i = 1; i < values.size(); ++i) {
    mu = beta * mu + (1.0 - beta) * values[i];
  }
  return mu;
}

double exact_mean(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("exact_mean: empty stream");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

void save_scores(const ScoreTable& t, const std::string& path) {
  Container c;
  c.kind = "FMSC";
  c.header = {{"method", t.method},
              {"t_grid", t.t_grid},
              {"noise_points", t.noise_points},
              {"noise_seed", t.noise_seed},
              {"normalizer_mode", t.normalizer_mode},
              {"surrogate_digest", t.surrogate_digest},
              {"dataset_digest", t.dataset_digest}};
  c.payload = t.scores;
  write_container(path, c);
}

ScoreTable load_scores(const std::string& path) {
  Container c = read_container(path, "FMSC");
  ScoreTable t;
  t.method = c.header.at("method").get<std::string>();
  t.t_grid = c.header.at("t_grid").get<std::vector<double>>();
  t.noise_points = c.header.at("noise_points").get<int>();
  t.noise_seed = c.header.at("noise_seed").get<uint64_t>();
  t.normalizer_mode = c.header.at("normalizer_mode").get<std::string>();
  t.surrogate_digest = c.header.at("surrogate_digest").get<uint64_t>();
  t.dataset_digest = c.header.at("dataset_digest").get<uint64_t>();
  t.scores = c.payload;
  return t;
}

// ---- k-means ---------------------------------------------------------------

namespace {

double sq_dist(const double* a, const double* b, size_t d) {
  double s = 0.0;
  for (size_t c = 0; c < d; ++c) {
    double diff = a[c] - b[c];
    s += diff * diff;
  }
  return s;
}

Clustering lloyd_once(const std::vector<double>& x, size_t n, size_t d,
                      size_t k, Rng& rng) {
  Clustering cl;
  cl.k = k;
  cl.dim = d;
  cl.centers.assign(k * d, 0.0);
  cl.assignment.assign(n, 0);

  // k-means++ seeding.
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  size_t first = rng.next_below(n);
  std::copy(x.begin() + first * d, x.begin() + (first + 1) * d,
            cl.centers.begin());
  for (size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double d2 = sq_dist(x.data() + i * d, cl.centers.data() + (j - 1) * d, d);
      min_d2[i] = std::min(min_d2[i], d2);
      total += min_d2[i];
    }
    size_t pick = 0;
    if (total > 0.0) {
      double u = rng.next_double() * total;
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc >= u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.next_below(n);
    }
    std::copy(x.begin() + pick * d, x.begin() + (pick + 1) * d,
              cl.centers.begin() + j * d);
  }

  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    // Assign.
    double inertia = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      size_t bj = 0;
      for (size_t j = 0; j < k; ++j) {
        double d2 = sq_dist(x.data() + i * d, cl.centers.data() + j * d, d);
        if (d2 < best) {
          best = d2;
          bj = j;
        }
      }
      cl.assignment[i] = static_cast<uint32_t>(bj);
      inertia += best;
    }
    // Repair empty clusters by stealing the globally farthest point.
    std::vector<size_t> counts(k, 0);
    for (uint32_t a : cl.assignment) ++counts[a];
    for (size_t j = 0; j < k; ++j) {
      while (counts[j] == 0) {
        double worst = -1.0;
        size_t victim = 0;
        for (size_t i = 0; i < n; ++i) {
          if (counts[cl.assignment[i]] <= 1) continue;
          double d2 = sq_dist(x.data() + i * d,
                              cl.centers.data() + cl.assignment[i] * d, d);
          if (d2 > worst) {
            worst = d2;
            victim = i;
          }
        }
        --counts[cl.assignment[victim]];
        cl.assignment[victim] = static_cast<uint32_t>(j);
        ++counts[j];
      }
    }
    // Update.
    cl.centers.assign(k * d, 0.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t c = 0; c < d; ++c) {
        cl.centers[cl.assignment[i] * d + c] += x[i * d + c];
      }
    }
    for (size_t j = 0; j < k; ++j) {
      for (size_t c = 0; c < d; ++c) {
        cl.centers[j * d + c] /= static_cast<double>(counts[j]);
      }
    }
    cl.inertia = 0.0;
    for (size_t i = 0; i < n; ++i) {
      cl.inertia += sq_dist(x.data() + i * d,
                            cl.centers.data() + cl.assignment[i] * d, d);
    }
    if (prev_inertia - cl.inertia <= 1e-8 * std::max(prev_inertia, 1e-300)) {
      break;
    }
    prev_inertia = cl.inertia;
  }

  // Hartigan polish: single-point moves with exact inertia deltas. Lloyd can
  // stall in assignments no center update improves; this escapes them and
  // makes small instances reliably hit the global optimum.
  std::vector<size_t> counts(k, 0);
  for (uint32_t a : cl.assignment) ++counts[a];
  for (int sweep = 0; sweep < 200; ++sweep) {
    bool moved = false;
    for (size_t i = 0; i < n; ++i) {
      size_t a = cl.assignment[i];
      if (counts[a] <= 1) continue;
      double da = sq_dist(x.data() + i * d, cl.centers.data() + a * d, d);
      double gain = static_cast<double>(counts[a]) /
                    static_cast<double>(counts[a] - 1) * da;
      double best_delta = -1e-12;
      size_t best_j = a;
      for (size_t j = 0; j < k; ++j) {
        if (j == a) continue;
        double dj = sq_dist(x.data() + i * d, cl.centers.data() + j * d, d);
        double cost = static_cast<double>(counts[j]) /
                      static_cast<double>(counts[j] + 1) * dj;
        if (cost - gain < best_delta) {
          best_delta = cost - gain;
          best_j = j;
        }
      }
      if (best_j != a) {
        for (size_t c = 0; c < d; ++c) {
          double xi = x[i * d + c];
          cl.centers[a * d + c] =
              (cl.centers[a * d + c] * counts[a] - xi) / (counts[a] - 1);
          cl.centers[best_j * d + c] =
              (cl.centers[best_j * d + c] * counts[best_j] + xi) /
              (counts[best_j] + 1);
        }
        --counts[a];
        ++counts[best_j];
        cl.assignment[i] = static_cast<uint32_t>(best_j);
        moved = true;
      }
    }
    if (!moved) break;
  }
  cl.inertia = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cl.inertia += sq_dist(x.data() + i * d,
                          cl.centers.data() + cl.assignment[i] * d, d);
  }
  return cl;
}

}  // namespace

Clustering kmeans(const std::vector<double>& features, size_t n, size_t dim,
                  size_t k, size_t restarts, uint64_t seed) {
  if (k == 0) throw std::invalid_argument("kmeans: k must be positive");
  if (k > n) throw std::invalid_argument("kmeans: k exceeds sample count");
  if (features.size() != n * dim) {
    throw std::invalid_argument("kmeans: feature matrix size mismatch");
  }
  Clustering best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (size_t r = 0; r < std::max<size_t>(restarts, 1); ++r) {
    Rng rng(derive_stream(seed, "kmeans-restart-" + std::to_string(r)));
    Clustering c = lloyd_once(features, n, dim, k, rng);
    if (c.inertia < best.inertia) best = std::move(c);
  }
  return best;
}

std::vector<std::pair<size_t, double>> inertia_curve(
    const std::vector<double>& features, size_t n, size_t dim,
    const std::vector<size_t>& k_range, size_t restarts, uint64_t seed) {
  if (k_range.empty()) throw std::invalid_argument("inertia_curve: empty k range");
  std::vector<std::pair<size_t, double>> out;
  for (size_t k : k_range) {
    out.emplace_back(k, kmeans(features, n, dim, k, restarts, seed).inertia);
  }
  return out;
}

void export_inertia_csv(const std::vector<std::pair<size_t, double>>& curve,
                        const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "k,inertia\n";
  f.precision(17);
  for (const auto& [k, inertia] : curve) f << k << "," << inertia << "\n";
}

void export_clustering_csv(const Clustering& c,
                           const std::vector<double>& features,
                           const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "index,label,distance_to_center\n";
  f.precision(17);
  for (size_t i = 0; i < c.assignment.size(); ++i) {
    double d2 = sq_dist(features.data() + i * c.dim,
                        c.centers.data() + c.assignment[i] * c.dim, c.dim);
    f << i << "," << c.assignment[i] << "," << std::sqrt(d2) << "\n";
  }
}

std::vector<double> pca_whiten(const std::vector<double>& x, size_t n,
                               size_t dim) {
  std::vector<double> mean, cov;
  mean_cov(x, n, dim, mean, cov);
  EigenSym e = eigh(cov, dim);
  std::vector<double> out(n * dim);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < dim; ++j) {
      double proj = 0.0;
      for (size_t c = 0; c < dim; ++c) {
        proj += e.vectors[c * dim + j] * (x[i * dim + c] - mean[c]);
      }
      out[i * dim + j] = proj / std::sqrt(std::max(e.values[j], 1e-12));
    }
  }
  return out;
}

std::vector<size_t> allocate_quotas(const std::vector<size_t>& cluster_sizes,
                                    size_t n_keep, QuotaMode mode) {
  const size_t k = cluster_sizes.size();
  if (k == 0) throw std::invalid_argument("allocate_quotas: no clusters");
  size_t total = std::accumulate(cluster_sizes.begin(), cluster_sizes.end(),
                                 size_t{0});
  if (n_keep > total) {
    throw std::invalid_argument("allocate_quotas: n_keep exceeds population");
  }
  std::vector<size_t> quotas(k, 0);
  if (mode == QuotaMode::Proportional) {
    // Largest-remainder rounding of n_keep * size_j / N.
    std::vector<double> frac(k);
    size_t assigned = 0;
    for (size_t j = 0; j < k; ++j) {
      double share = static_cast<double>(n_keep) *
                     static_cast<double>(cluster_sizes[j]) /
                     static_cast<double>(total);
      quotas[j] = static_cast<size_t>(std::floor(share));
      frac[j] = share - std::floor(share);
      assigned += quotas[j];
    }
    std::vector<size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (frac[a] != frac[b]) return frac[a] > frac[b];
      return a < b;
    });
    for (size_t r = 0; assigned < n_keep; ++r) {
      ++quotas[order[r % k]];
      ++assigned;
    }
  } else {
    size_t base = n_keep / k;
    size_t rem = n_keep - base * k;
    quotas.assign(k, base);
    // Remainder goes to the largest clusters (ties: lower index).
    std::vector<size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (cluster_sizes[a] != cluster_sizes[b]) {
        return cluster_sizes[a] > cluster_sizes[b];
      }
      return a < b;
    });
    for (size_t r = 0; r < rem; ++r) ++quotas[order[r]];
  }
  // Cap at cluster size; push each deficit unit to the cluster with the
  // largest slack (ties: lower index).
  size_t deficit = 0;
  for (size_t j = 0; j < k; ++j) {
    if (quotas[j] > cluster_sizes[j]) {
      deficit += quotas[j] - cluster_sizes[j];
      quotas[j] = cluster_sizes[j];
    }
  }
  while (deficit > 0) {
    size_t best = k;
    size_t best_slack = 0;
    for (size_t j = 0; j < k; ++j) {
      size_t slack = cluster_sizes[j] - quotas[j];
      if (slack > best_slack) {
        best_slack = slack;
        best = j;
      }
    }
    if (best == k) {
      throw std::logic_error("allocate_quotas: no slack left");
    }
    ++quotas[best];
    --deficit;
  }
  return quotas;
}

size_t keep_count(size_t n, double pr) {
  if (!(pr >= 0.0 && pr < 1.0)) {
    throw std::invalid_argument("pruning fraction must be in [0,1)");
  }
  return static_cast<size_t>(
      std::floor((1.0 - pr) * static_cast<double>(n) + 0.5));
}

SubsetManifest select_by_center_distance(const DatasetBundle& ds,
                                         const Clustering& c,
                                         const std::vector<double>& features,
                                         const std::vector<size_t>& quotas,
                                         SelectDirection direction, double pr) {
  if (quotas.size() != c.k) {
    throw std::invalid_argument("select_by_center_distance: quota count mismatch");
  }
  std::vector<std::vector<uint32_t>> members(c.k);
  for (size_t i = 0; i < c.assignment.size(); ++i) {
    members[c.assignment[i]].push_back(static_cast<uint32_t>(i));
  }
  std::vector<uint32_t> keep;
  for (size_t j = 0; j < c.k; ++j) {
    auto& idx = members[j];
    std::stable_sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
      double da = sq_dist(features.data() + a * c.dim,
                          c.centers.data() + j * c.dim, c.dim);
      double db = sq_dist(features.data() + b * c.dim,
                          c.centers.data() + j * c.dim, c.dim);
      if (da != db) {
        return direction == SelectDirection::Nearest ? da < db : da > db;
      }
      return a < b;
    });
    size_t take = std::min(quotas[j], idx.size());
    keep.insert(keep.end(), idx.begin(), idx.begin() + take);
  }
  std::sort(keep.begin(), keep.end());
  SubsetManifest m;
  m.parent_digest = ds.digest();
  m.indices = std::move(keep);
  m.method = std::string("clust-") +
             (direction == SelectDirection::Nearest ? "nearest" : "furthest");
  m.pr = pr;
  return m;
}

SubsetManifest select_top(const DatasetBundle& ds, const ScoreTable& scores,
                          double pr, bool inverse) {
  if (scores.scores.size() != ds.n) {
    throw std::invalid_argument("select_top: score table does not match dataset");
  }
  size_t keep = keep_count(ds.n, pr);
  std::vector<uint32_t> order(ds.n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    double sa = scores.scores[a], sb = scores.scores[b];
    if (sa != sb) return inverse ? sa < sb : sa > sb;
    return a < b;
  });
  std::vector<uint32_t> kept(order.begin(), order.begin() + keep);
  std::sort(kept.begin(), kept.end());
  SubsetManifest m;
  m.parent_digest = ds.digest();
  m.indices = std::move(kept);
  m.method = scores.method + (inverse ? "-inv" : "");
  m.pr = pr;
  return m;
}

SubsetManifest select_random(const DatasetBundle& ds, double pr,
                             uint64_t seed) {
  size_t keep = keep_count(ds.n, pr);
  std::vector<uint32_t> perm(ds.n);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(derive_stream(seed, "select-random"));
  for (size_t i = 0; i < keep; ++i) {
    size_t j = i + rng.next_below(ds.n - i);
    std::swap(perm[i], perm[j]);
  }
  std::vector<uint32_t> kept(perm.begin(), perm.begin() + keep);
  std::sort(kept.begin(), kept.end());
  SubsetManifest m;
  m.parent_digest = ds.digest();
  m.indices = std::move(kept);
  m.method = "random";
  m.pr = pr;
  return m;
}

}  // namespace fmlab
