#pragma once

// Synthetic 2-D datasets with per-sample mode labels, subset manifests, and
// file I/O. Generation is fully determined by (name, params, seed); the same
// triple reproduces the same bytes on any platform.

#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/vendor_json.hpp"

namespace fmlab {

struct DatasetBundle {
  std::string name;
  size_t n = 0;
  size_t dim = 0;
  size_t num_modes = 0;
  std::vector<double> samples;  // n × dim, row-major
  std::vector<int32_t> mode_labels;
  uint64_t gen_seed = 0;
  nlohmann::json params;

  const double* sample(size_t i) const { return samples.data() + i * dim; }
  uint64_t digest() const;
};

struct SubsetManifest {
  uint64_t parent_digest = 0;
  std::vector<uint32_t> indices;  // sorted, unique
  std::string method;
  double pr = 0.0;  // pruning fraction

  nlohmann::json to_json() const;
  static SubsetManifest from_json(const nlohmann::json& j);
  uint64_t digest() const;
};

// Supported names: eight-gaussians, two-moons, checkerboard, two-spirals.
// Common params: "balanced" (bool, default false) cycles modes round-robin
// instead of drawing them at random. Per-family params:
//   eight-gaussians: radius (4), sigma (0.15), weights (array of 8)
//   two-moons:       noise (0.08)
//   checkerboard:    grid (4), extent (4.0)
//   two-spirals:     noise (0.1), turns (1.75)
DatasetBundle generate_dataset(const std::string& name, size_t n,
                               const nlohmann::json& params, uint64_t seed);

// Mode centers of the generator (eight-gaussians only; used by mode-coverage
// diagnostics). Returns num_modes × dim.
std::vector<double> generator_mode_centers(const DatasetBundle& ds);

// Two disjoint random subsets of sizes round(f1*N) and min(round(f2*N),
// remainder), round-half-up, f1 first.
std::pair<SubsetManifest, SubsetManifest> split_disjoint(
    const DatasetBundle& ds, double f1, double f2, uint64_t seed);

// Subset of all samples whose label is NOT in `modes`.
SubsetManifest drop_modes(const DatasetBundle& ds,
                          const std::vector<int32_t>& modes);

SubsetManifest full_subset(const DatasetBundle& ds);
SubsetManifest complement_subset(const DatasetBundle& ds,
                                 const SubsetManifest& m);

// Materialize the subset rows (in manifest index order).
std::vector<double> gather_samples(const DatasetBundle& ds,
                                   const SubsetManifest& m);

void save_dataset(const DatasetBundle& ds, const std::string& path);
DatasetBundle load_dataset(const std::string& path);
void export_dataset_csv(const DatasetBundle& ds, const std::string& path);

void save_manifest(const SubsetManifest& m, const std::string& path);
// Throws if the manifest's parent digest does not match `expected_parent`
// (pass 0 to skip the check).
SubsetManifest load_manifest(const std::string& path,
                             uint64_t expected_parent = 0);

}  // namespace fmlab
