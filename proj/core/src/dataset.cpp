#include "fmlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "fmlab/container.hpp"
#include "fmlab/digest.hpp"
#include "fmlab/prng.hpp"

namespace fmlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double param_or(const nlohmann::json& p, const char* key, double dflt) {
  return p.contains(key) ? p.at(key).get<double>() : dflt;
}

bool param_or(const nlohmann::json& p, const char* key, bool dflt) {
  return p.contains(key) ? p.at(key).get<bool>() : dflt;
}

// Draws a mode index: round-robin when balanced, else weighted draw.
struct ModeChooser {
  std::vector<double> cumulative;  // normalized cumulative weights
  bool balanced;
  size_t k;

  ModeChooser(size_t num_modes, const std::vector<double>& weights,
              bool balanced_in)
      : balanced(balanced_in), k(num_modes) {
    std::vector<double> w = weights;
    if (w.empty()) w.assign(k, 1.0);
    if (w.size() != k) {
      throw std::invalid_argument("weights length does not match mode count");
    }
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("weights must sum > 0");
    double acc = 0.0;
    for (double v : w) {
      acc += v / total;
      cumulative.push_back(acc);
    }
    cumulative.back() = 1.0;
  }

  size_t choose(size_t i, Rng& rng) const {
    if (balanced) return i % k;
    double u = rng.next_double();
    return static_cast<size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
  }
};

}  // namespace

DatasetBundle generate_dataset(const std::string& name, size_t n,
                               const nlohmann::json& params, uint64_t seed) {
  if (n == 0) throw std::invalid_argument("dataset size must be positive");
  DatasetBundle ds;
  ds.name = name;
  ds.n = n;
  ds.dim = 2;
  ds.gen_seed = seed;
  ds.params = params.is_null() ? nlohmann::json::object() : params;
  ds.samples.resize(n * 2);
  ds.mode_labels.resize(n);
  Rng rng(derive_stream(seed, "dataset/" + name));
  const bool balanced = param_or(ds.params, "balanced", false);

  if (name == "eight-gaussians") {
    ds.num_modes = 8;
    double radius = param_or(ds.params, "radius", 4.0);
    double sigma = param_or(ds.params, "sigma", 0.15);
    std::vector<double> weights;
    if (ds.params.contains("weights")) {
      weights = ds.params.at("weights").get<std::vector<double>>();
    }
    ModeChooser chooser(8, weights, balanced);
    for (size_t i = 0; i < n; ++i) {
      size_t m = chooser.choose(i, rng);
      double ang = 2.0 * kPi * static_cast<double>(m) / 8.0;
      ds.samples[2 * i] = radius * std::cos(ang) + sigma * rng.next_gaussian();
      ds.samples[2 * i + 1] =
          radius * std::sin(ang) + sigma * rng.next_gaussian();
      ds.mode_labels[i] = static_cast<int32_t>(m);
    }
  } else if (name == "two-moons") {
    ds.num_modes = 2;
    double noise = param_or(ds.params, "noise", 0.08);
    ModeChooser chooser(2, {}, balanced);
    for (size_t i = 0; i < n; ++i) {
      size_t m = chooser.choose(i, rng);
      double phi = kPi * rng.next_double();
      double x, y;
      if (m == 0) {
        x = std::cos(phi);
        y = std::sin(phi);
      } else {
        x = 1.0 - std::cos(phi);
        y = 0.5 - std::sin(phi);
      }
      ds.samples[2 * i] = x + noise * rng.next_gaussian();
      ds.samples[2 * i + 1] = y + noise * rng.next_gaussian();
      ds.mode_labels[i] = static_cast<int32_t>(m);
    }
  } else if (name == "checkerboard") {
    int grid = static_cast<int>(param_or(ds.params, "grid", 4.0));
    if (grid < 2) throw std::invalid_argument("checkerboard grid must be >= 2");
    double extent = param_or(ds.params, "extent", 4.0);
    // Active cells: (i+j) even. Mode label = index into the active-cell list.
    std::vector<std::pair<int, int>> cells;
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        if ((i + j) % 2 == 0) cells.emplace_back(i, j);
      }
    }
    ds.num_modes = cells.size();
    ModeChooser chooser(cells.size(), {}, balanced);
    double cell = 2.0 * extent / grid;
    for (size_t i = 0; i < n; ++i) {
      size_t m = chooser.choose(i, rng);
      auto [ci, cj] = cells[m];
      ds.samples[2 * i] = -extent + (ci + rng.next_double()) * cell;
      ds.samples[2 * i + 1] = -extent + (cj + rng.next_double()) * cell;
      ds.mode_labels[i] = static_cast<int32_t>(m);
    }
  } else if (name == "two-spirals") {
    ds.num_modes = 2;
    double noise = param_or(ds.params, "noise", 0.1);
    double turns = param_or(ds.params, "turns", 1.75);
    ModeChooser chooser(2, {}, balanced);
    for (size_t i = 0; i < n; ++i) {
      size_t m = chooser.choose(i, rng);
      double u = std::sqrt(rng.next_double());  // denser toward the rim
      double phi = turns * 2.0 * kPi * u;
      double r = 0.5 + 3.5 * u;
      double s = (m == 0) ? 1.0 : -1.0;
      ds.samples[2 * i] = s * r * std::cos(phi) + noise * rng.next_gaussian();
      ds.samples[2 * i + 1] =
          s * r * std::sin(phi) + noise * rng.next_gaussian();
      ds.mode_labels[i] = static_cast<int32_t>(m);
    }
  } else {
    throw std::invalid_argument("unknown dataset name: " + name);
  }
  if (n < ds.num_modes) {
    throw std::invalid_argument("dataset size " + std::to_string(n) +
                                " smaller than mode count " +
                                std::to_string(ds.num_modes));
  }
  return ds;
}

std::vector<double> generator_mode_centers(const DatasetBundle& ds) {
  if (ds.name != "eight-gaussians") {
    throw std::invalid_argument("mode centers only defined for eight-gaussians");
  }
  double radius = param_or(ds.params, "radius", 4.0);
  std::vector<double> centers(8 * 2);
  for (size_t m = 0; m < 8; ++m) {
    double ang = 2.0 * kPi * static_cast<double>(m) / 8.0;
    centers[2 * m] = radius * std::cos(ang);
    centers[2 * m + 1] = radius * std::sin(ang);
  }
  return centers;
}

uint64_t DatasetBundle::digest() const {
  Digest64 d;
  d.update(name);
  d.update_value(n).update_value(dim).update_value(num_modes);
  d.update_value(gen_seed);
  d.update(params.dump());
  d.update(samples.data(), samples.size() * sizeof(double));
  d.update(mode_labels.data(), mode_labels.size() * sizeof(int32_t));
  return d.value();
}

nlohmann::json SubsetManifest::to_json() const {
  return {{"parent_digest", parent_digest},
          {"indices", indices},
          {"method", method},
          {"pr", pr}};
}

SubsetManifest SubsetManifest::from_json(const nlohmann::json& j) {
  SubsetManifest m;
  m.parent_digest = j.at("parent_digest").get<uint64_t>();
  m.indices = j.at("indices").get<std::vector<uint32_t>>();
  m.method = j.at("method").get<std::string>();
  m.pr = j.at("pr").get<double>();
  if (!std::is_sorted(m.indices.begin(), m.indices.end()) ||
      std::adjacent_find(m.indices.begin(), m.indices.end()) !=
          m.indices.end()) {
    throw std::runtime_error("subset manifest indices not sorted/unique");
  }
  return m;
}

uint64_t SubsetManifest::digest() const {
  Digest64 d;
  d.update(to_json().dump());
  return d.value();
}

namespace {

SubsetManifest make_manifest(const DatasetBundle& ds,
                             std::vector<uint32_t> indices, std::string method,
                             double pr) {
  std::sort(indices.begin(), indices.end());
  SubsetManifest m;
  m.parent_digest = ds.digest();
  m.indices = std::move(indices);
  m.method = std::move(method);
  m.pr = pr;
  return m;
}

size_t round_half_up(double v) {
  return static_cast<size_t>(std::floor(v + 0.5));
}

}  // namespace

std::pair<SubsetManifest, SubsetManifest> split_disjoint(
    const DatasetBundle& ds, double f1, double f2, uint64_t seed) {
  if (f1 < 0 || f2 < 0 || f1 + f2 > 1.0 + 1e-12) {
    throw std::invalid_argument("split fractions out of range");
  }
  size_t n1 = round_half_up(f1 * static_cast<double>(ds.n));
  size_t n2 = std::min(round_half_up(f2 * static_cast<double>(ds.n)),
                       ds.n - n1);
  std::vector<uint32_t> perm(ds.n);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(derive_stream(seed, "split"));
  for (size_t i = ds.n - 1; i > 0; --i) {
    size_t j = rng.next_below(i + 1);
    std::swap(perm[i], perm[j]);
  }
  std::vector<uint32_t> a(perm.begin(), perm.begin() + n1);
  std::vector<uint32_t> b(perm.begin() + n1, perm.begin() + n1 + n2);
  return {make_manifest(ds, std::move(a), "split-a", 1.0 - f1),
          make_manifest(ds, std::move(b), "split-b", 1.0 - f2)};
}

SubsetManifest drop_modes(const DatasetBundle& ds,
                          const std::vector<int32_t>& modes) {
  std::set<int32_t> drop(modes.begin(), modes.end());
  for (int32_t m : drop) {
    if (m < 0 || static_cast<size_t>(m) >= ds.num_modes) {
      throw std::invalid_argument("drop_modes: unknown label " +
                                  std::to_string(m));
    }
  }
  std::vector<uint32_t> keep;
  for (size_t i = 0; i < ds.n; ++i) {
    if (!drop.count(ds.mode_labels[i])) keep.push_back(static_cast<uint32_t>(i));
  }
  if (keep.empty()) {
    throw std::invalid_argument("drop_modes: dropping all modes leaves an empty training set");
  }
  double pr = 1.0 - static_cast<double>(keep.size()) / static_cast<double>(ds.n);
  return make_manifest(ds, std::move(keep), "drop-modes", pr);
}

SubsetManifest full_subset(const DatasetBundle& ds) {
  std::vector<uint32_t> all(ds.n);
  std::iota(all.begin(), all.end(), 0u);
  return make_manifest(ds, std::move(all), "full", 0.0);
}

SubsetManifest complement_subset(const DatasetBundle& ds,
                                 const SubsetManifest& m) {
  std::vector<bool> in(ds.n, false);
  for (uint32_t i : m.indices) in[i] = true;
  std::vector<uint32_t> out;
  for (size_t i = 0; i < ds.n; ++i) {
    if (!in[i]) out.push_back(static_cast<uint32_t>(i));
  }
  double pr = 1.0 - static_cast<double>(out.size()) / static_cast<double>(ds.n);
  return make_manifest(ds, std::move(out), "complement(" + m.method + ")", pr);
}

std::vector<double> gather_samples(const DatasetBundle& ds,
                                   const SubsetManifest& m) {
  std::vector<double> out;
  out.reserve(m.indices.size() * ds.dim);
  for (uint32_t i : m.indices) {
    out.insert(out.end(), ds.sample(i), ds.sample(i) + ds.dim);
  }
  return out;
}

void save_dataset(const DatasetBundle& ds, const std::string& path) {
  Container c;
  c.kind = "FMDS";
  c.header = {{"name", ds.name},     {"n", ds.n},
              {"dim", ds.dim},       {"num_modes", ds.num_modes},
              {"gen_seed", ds.gen_seed}, {"params", ds.params}};
  c.payload = ds.samples;
  // Labels ride in the payload after the samples, widened to f64.
  for (int32_t l : ds.mode_labels) c.payload.push_back(l);
  write_container(path, c);
}

DatasetBundle load_dataset(const std::string& path) {
  Container c = read_container(path, "FMDS");
  DatasetBundle ds;
  ds.name = c.header.at("name").get<std::string>();
  ds.n = c.header.at("n").get<size_t>();
  ds.dim = c.header.at("dim").get<size_t>();
  ds.num_modes = c.header.at("num_modes").get<size_t>();
  ds.gen_seed = c.header.at("gen_seed").get<uint64_t>();
  ds.params = c.header.at("params");
  if (c.payload.size() != ds.n * ds.dim + ds.n) {
    throw std::runtime_error("dataset payload size mismatch: " + path);
  }
  ds.samples.assign(c.payload.begin(), c.payload.begin() + ds.n * ds.dim);
  for (size_t i = 0; i < ds.n; ++i) {
    ds.mode_labels.push_back(
        static_cast<int32_t>(c.payload[ds.n * ds.dim + i]));
  }
  return ds;
}

void export_dataset_csv(const DatasetBundle& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "index";
  for (size_t d = 0; d < ds.dim; ++d) f << ",x" << d;
  f << ",mode\n";
  f.precision(17);
  for (size_t i = 0; i < ds.n; ++i) {
    f << i;
    for (size_t d = 0; d < ds.dim; ++d) f << "," << ds.sample(i)[d];
    f << "," << ds.mode_labels[i] << "\n";
  }
}

void save_manifest(const SubsetManifest& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << m.to_json().dump(2) << "\n";
}

SubsetManifest load_manifest(const std::string& path,
                             uint64_t expected_parent) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  f >> j;
  SubsetManifest m = SubsetManifest::from_json(j);
  if (expected_parent != 0 && m.parent_digest != expected_parent) {
    throw std::runtime_error("subset manifest parent digest mismatch: " + path);
  }
  return m;
}

}  // namespace fmlab
