#include <benchmark/benchmark.h>

#include <numeric>

#include "fmlab/dataset.hpp"
#include "fmlab/prng.hpp"
#include "fmlab/sampler.hpp"
#include "fmlab/scores.hpp"
#include "fmlab/tensor.hpp"
#include "fmlab/train.hpp"

using namespace fmlab;

namespace {

Tensor random_matrix(size_t r, size_t c, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.next_gaussian();
  return Tensor({r, c}, std::move(v));
}

void bm_matmul(benchmark::State& state) {
  size_t n = static_cast<size_t>(state.range(0));
  Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void bm_train_step(benchmark::State& state) {
  DatasetBundle ds = generate_dataset("eight-gaussians", 2048, {}, 1);
  SubsetManifest full = full_subset(ds);
  TrainConfig cfg;
  cfg.steps = 1;
  cfg.batch = 256;
  VelocityModel m = build_model(Arch::MlpS, 2, 1);
  for (auto _ : state) {
    cfg.seed += 1;  // fresh stream so each step draws new batches
    train_model(m, ds, full, cfg);
  }
}

void bm_kmeans(benchmark::State& state) {
  DatasetBundle ds = generate_dataset("eight-gaussians", 2048, {}, 2);
  std::vector<double> feats = pca_whiten(ds.samples, ds.n, ds.dim);
  for (auto _ : state) {
    Clustering c = kmeans(feats, ds.n, ds.dim, 8, 4, 7);
    benchmark::DoNotOptimize(c.inertia);
  }
}

void bm_integrate_batch(benchmark::State& state) {
  VelocityModel m = build_model(Arch::MlpS, 2, 3);
  NoiseBank bank{11, 2};
  std::vector<size_t> idx(512);
  std::iota(idx.begin(), idx.end(), size_t{0});
  Tensor x0 = bank.batch(idx);
  for (auto _ : state) {
    Tensor eps = integrate_batch(m, x0, OdeMethod::Midpoint, 32);
    benchmark::DoNotOptimize(eps.data().data());
  }
}

void bm_score_grad(benchmark::State& state) {
  DatasetBundle ds = generate_dataset("eight-gaussians", 256, {}, 4);
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.batch = 64;
  VelocityModel s = train_surrogate(ds, full_subset(ds), cfg);
  ScoreConfig sc;
  sc.noise_seed = 9;
  for (auto _ : state) {
    ScoreTable t = score_grad(s, ds, sc);
    benchmark::DoNotOptimize(t.scores.data());
  }
}

}  // namespace

BENCHMARK(bm_matmul)->Arg(64)->Arg(256);
BENCHMARK(bm_train_step);
BENCHMARK(bm_kmeans);
BENCHMARK(bm_integrate_batch);
BENCHMARK(bm_score_grad);

BENCHMARK_MAIN();
