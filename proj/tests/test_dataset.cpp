#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "fmlab/dataset.hpp"

using namespace fmlab;

namespace {
const char* kTmpDs = "test_dataset_tmp.fmds";
const char* kTmpManifest = "test_dataset_tmp.subset.json";
}  // namespace

TEST_CASE("generation is deterministic and respects n/dim/modes") {
  for (const char* name :
       {"eight-gaussians", "two-moons", "checkerboard", "two-spirals"}) {
    DatasetBundle a = generate_dataset(name, 512, {}, 9);
    DatasetBundle b = generate_dataset(name, 512, {}, 9);
    DatasetBundle c = generate_dataset(name, 512, {}, 10);
    CHECK(a.n == 512);
    CHECK(a.dim == 2);
    CHECK(a.samples.size() == 1024);
    CHECK(a.mode_labels.size() == 512);
    CHECK(a.num_modes >= 2);
    CHECK(a.digest() == b.digest());
    CHECK(a.digest() != c.digest());
    for (int32_t l : a.mode_labels) {
      CHECK(l >= 0);
      CHECK(l < static_cast<int32_t>(a.num_modes));
    }
  }
}

TEST_CASE("eight-gaussians balanced mode assignment is round-robin even") {
  DatasetBundle ds =
      generate_dataset("eight-gaussians", 800, {{"balanced", true}}, 3);
  std::vector<size_t> counts(8, 0);
  for (int32_t l : ds.mode_labels) ++counts[static_cast<size_t>(l)];
  for (size_t c : counts) CHECK(c == 100);
  // Samples sit near their mode center.
  std::vector<double> centers = generator_mode_centers(ds);
  for (size_t i = 0; i < ds.n; ++i) {
    size_t m = static_cast<size_t>(ds.mode_labels[i]);
    double dx = ds.sample(i)[0] - centers[2 * m];
    double dy = ds.sample(i)[1] - centers[2 * m + 1];
    CHECK(std::sqrt(dx * dx + dy * dy) < 1.0);  // 0.15 sigma, huge margin
  }
}

TEST_CASE("n below mode count is rejected") {
  CHECK_THROWS(generate_dataset("eight-gaussians", 4, {}, 1));
  CHECK_THROWS(generate_dataset("unknown-family", 100, {}, 1));
}

TEST_CASE("dataset file roundtrip preserves the digest") {
  DatasetBundle ds = generate_dataset("two-moons", 300, {{"noise", 0.05}}, 21);
  save_dataset(ds, kTmpDs);
  DatasetBundle back = load_dataset(kTmpDs);
  CHECK(back.digest() == ds.digest());
  CHECK(back.name == ds.name);
  CHECK(back.mode_labels == ds.mode_labels);
  CHECK(back.params == ds.params);
  std::remove(kTmpDs);
}

TEST_CASE("split_disjoint: round-half-up sizes, disjoint sorted indices") {
  DatasetBundle ds = generate_dataset("eight-gaussians", 101, {}, 2);
  auto [a, b] = split_disjoint(ds, 0.5, 0.5, 77);
  CHECK(a.indices.size() == 51);  // round(50.5) up
  CHECK(b.indices.size() == 50);
  std::set<uint32_t> seen(a.indices.begin(), a.indices.end());
  for (uint32_t i : b.indices) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 101);
  CHECK(std::is_sorted(a.indices.begin(), a.indices.end()));
  CHECK(std::is_sorted(b.indices.begin(), b.indices.end()));
  // Deterministic in the seed, different across seeds.
  auto [a2, b2] = split_disjoint(ds, 0.5, 0.5, 77);
  CHECK(a2.indices == a.indices);
  auto [a3, b3] = split_disjoint(ds, 0.5, 0.5, 78);
  CHECK(a3.indices != a.indices);
}

TEST_CASE("drop_modes removes exactly the labelled samples") {
  DatasetBundle ds =
      generate_dataset("eight-gaussians", 400, {{"balanced", true}}, 5);
  SubsetManifest kept = drop_modes(ds, {0, 3});
  CHECK(kept.indices.size() == 300);
  for (uint32_t i : kept.indices) {
    CHECK(ds.mode_labels[i] != 0);
    CHECK(ds.mode_labels[i] != 3);
  }
  CHECK_THROWS(drop_modes(ds, {42}));
  CHECK_THROWS(drop_modes(ds, {0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST_CASE("complement partitions the index space") {
  DatasetBundle ds = generate_dataset("checkerboard", 200, {}, 8);
  auto [a, _] = split_disjoint(ds, 0.3, 0.7, 4);
  SubsetManifest comp = complement_subset(ds, a);
  CHECK(a.indices.size() + comp.indices.size() == ds.n);
  std::set<uint32_t> all(a.indices.begin(), a.indices.end());
  all.insert(comp.indices.begin(), comp.indices.end());
  CHECK(all.size() == ds.n);
}

TEST_CASE("manifest json roundtrip and parent-digest check") {
  DatasetBundle ds = generate_dataset("two-spirals", 150, {}, 6);
  auto [a, b] = split_disjoint(ds, 0.4, 0.6, 13);
  save_manifest(a, kTmpManifest);
  SubsetManifest back = load_manifest(kTmpManifest, ds.digest());
  CHECK(back.digest() == a.digest());
  CHECK(back.indices == a.indices);
  DatasetBundle other = generate_dataset("two-spirals", 150, {}, 7);
  CHECK_THROWS(load_manifest(kTmpManifest, other.digest()));
  std::remove(kTmpManifest);
}

TEST_CASE("unsorted manifest indices are rejected") {
  nlohmann::json j = {{"parent_digest", 1},
                      {"indices", {3, 1, 2}},
                      {"method", "x"},
                      {"pr", 0.0}};
  CHECK_THROWS(SubsetManifest::from_json(j));
}

TEST_CASE("gather_samples materializes rows in manifest order") {
  DatasetBundle ds = generate_dataset("eight-gaussians", 64, {}, 3);
  SubsetManifest m = full_subset(ds);
  m.indices = {2, 5, 9};
  std::vector<double> rows = gather_samples(ds, m);
  REQUIRE(rows.size() == 6);
  for (size_t r = 0; r < 3; ++r) {
    CHECK(rows[2 * r] == ds.sample(m.indices[r])[0]);
    CHECK(rows[2 * r + 1] == ds.sample(m.indices[r])[1]);
  }
}
