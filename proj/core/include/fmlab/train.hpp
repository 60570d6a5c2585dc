#pragma once

// Flow-matching objective and training loop. Transport convention: t=0 is
// Gaussian noise, t=1 is data; the interpolant is x_t = (1-t) x0 + t x1 and
// the regression target is the constant velocity x1 - x0. The loss is the
// mean over batch elements and dimensions of the squared residual.

#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/dataset.hpp"
#include "fmlab/model.hpp"
#include "fmlab/tensor.hpp"

namespace fmlab {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  uint64_t steps = 10000;
  size_t batch = 256;
  AdamConfig adam;
  uint64_t seed = 0;
  double surrogate_fraction = 0.07;
  uint64_t log_interval = 500;  // loss trace granularity

  void validate() const;
};

struct TrainTrace {
  std::vector<double> interval_losses;  // mean loss per log interval
  double wall_seconds = 0.0;
  uint64_t final_checkpoint_digest = 0;
  uint64_t steps = 0;

  nlohmann::json to_json() const;
};

// Thrown when the training loss becomes non-finite.
struct TrainDivergence : std::runtime_error {
  explicit TrainDivergence(const std::string& what) : std::runtime_error(what) {}
};

// (1-t) x0 + t x1 for a single pair of equal-shaped points.
Tensor interpolant(const Tensor& x0, const Tensor& x1, double t);

// Flow-matching loss for a batch. x1: N×d data, x0: N×d noise, t: N values in
// [0,1]. Attaches to `tape` when given.
Tensor fm_loss(VelocityModel& model, const Tensor& x1, const Tensor& x0,
               const Tensor& t, Tape* tape = nullptr);

// Per-step sampling, in this order from one stream derived from cfg.seed:
// batch indices into the subset (with replacement), then x0 ~ N(0,I), then
// t ~ U(0,1). Deterministic under identical (model, subset, cfg).
TrainTrace train_model(VelocityModel& model, const DatasetBundle& ds,
                       const SubsetManifest& subset, const TrainConfig& cfg);

// mlp-s trained for round(surrogate_fraction * cfg.steps) steps.
VelocityModel train_surrogate(const DatasetBundle& ds,
                              const SubsetManifest& subset,
                              const TrainConfig& cfg);

}  // namespace fmlab
