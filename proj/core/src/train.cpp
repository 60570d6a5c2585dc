#include "fmlab/train.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fmlab/prng.hpp"

namespace fmlab {

void TrainConfig::validate() const {
  if (batch == 0) throw std::invalid_argument("batch must be >= 1");
  if (adam.lr <= 0) throw std::invalid_argument("lr must be positive");
  if (!(surrogate_fraction > 0 && surrogate_fraction <= 1)) {
    throw std::invalid_argument("surrogate_fraction must be in (0,1]");
  }
}

nlohmann::json TrainTrace::to_json() const {
  return {{"interval_losses", interval_losses},
          {"wall_seconds", wall_seconds},
          {"final_checkpoint_digest", final_checkpoint_digest},
          {"steps", steps}};
}

Tensor interpolant(const Tensor& x0, const Tensor& x1, double t) {
  if (x0.shape() != x1.shape()) {
    throw std::invalid_argument("interpolant: shape mismatch " +
                                shape_str(x0.shape()) + " vs " +
                                shape_str(x1.shape()));
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("interpolant: t outside [0,1]");
  }
  std::vector<double> out(x0.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - t) * x0.data()[i] + t * x1.data()[i];
  }
  return Tensor(x0.shape(), std::move(out));
}

Tensor fm_loss(VelocityModel& model, const Tensor& x1, const Tensor& x0,
               const Tensor& t, Tape* tape) {
  if (x1.shape() != x0.shape()) {
    throw std::invalid_argument("fm_loss: data/noise shape mismatch " +
                                shape_str(x1.shape()) + " vs " +
                                shape_str(x0.shape()));
  }
  size_t n = x1.rows(), d = x1.cols();
  if (n == 0) throw std::invalid_argument("fm_loss: empty batch");
  // x_t and the target are constants; only the model output carries grads.
  std::vector<double> xt(n * d), target(n * d);
  for (size_t i = 0; i < n; ++i) {
    double ti = t.data()[i];
    for (size_t c = 0; c < d; ++c) {
      size_t k = i * d + c;
      xt[k] = (1.0 - ti) * x0.data()[k] + ti * x1.data()[k];
      target[k] = x1.data()[k] - x0.data()[k];
    }
  }
  Tensor pred = model.velocity(Tensor({n, d}, std::move(xt)), t, tape);
  Tensor resid = sub(pred, Tensor({n, d}, std::move(target)));
  return mean(mul(resid, resid));
}

namespace {

struct AdamState {
  std::vector<std::vector<double>> m, v;
  uint64_t t = 0;

  explicit AdamState(const VelocityModel& model) {
    for (const auto& p : model.params) {
      m.emplace_back(p.value.size(), 0.0);
      v.emplace_back(p.value.size(), 0.0);
    }
  }

  void step(VelocityModel& model, const Tape& tape,
            const std::vector<int>& nodes, const AdamConfig& cfg) {
    ++t;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (size_t p = 0; p < model.params.size(); ++p) {
      const auto& g = tape.grad(nodes[p]);
      auto& w = model.params[p].value.mutable_data();
      for (size_t i = 0; i < w.size(); ++i) {
        m[p][i] = cfg.beta1 * m[p][i] + (1.0 - cfg.beta1) * g[i];
        v[p][i] = cfg.beta2 * v[p][i] + (1.0 - cfg.beta2) * g[i] * g[i];
        double mhat = m[p][i] / bc1;
        double vhat = v[p][i] / bc2;
        w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      }
    }
  }
};

}  // namespace

TrainTrace train_model(VelocityModel& model, const DatasetBundle& ds,
                       const SubsetManifest& subset, const TrainConfig& cfg) {
  cfg.validate();
  if (subset.indices.empty()) {
    throw std::invalid_argument("train: empty subset");
  }
  if (subset.parent_digest != ds.digest()) {
    throw std::invalid_argument("train: subset manifest does not belong to dataset");
  }
  auto t_start = std::chrono::steady_clock::now();
  const size_t d = ds.dim;
  const size_t b = cfg.batch;
  Rng rng(derive_stream(cfg.seed, "train"));
  AdamState adam(model);
  TrainTrace trace;
  double interval_sum = 0.0;
  uint64_t interval_n = 0;

  for (uint64_t step = 0; step < cfg.steps; ++step) {
    // Draw order is part of the determinism contract: indices, noise, times.
    std::vector<double> x1(b * d), x0(b * d), tv(b);
    for (size_t i = 0; i < b; ++i) {
      uint32_t idx = subset.indices[rng.next_below(subset.indices.size())];
      for (size_t c = 0; c < d; ++c) x1[i * d + c] = ds.sample(idx)[c];
    }
    for (double& v : x0) v = rng.next_gaussian();
    for (double& v : tv) v = rng.next_double();

    Tape tape;
    Tensor loss = fm_loss(model, Tensor({b, d}, std::move(x1)),
                          Tensor({b, d}, std::move(x0)),
                          Tensor({b}, std::move(tv)), &tape);
    double lv = loss.item();
    if (!std::isfinite(lv)) {
      throw TrainDivergence("training diverged at step " +
                            std::to_string(step));
    }
    tape.backward(loss);
    adam.step(model, tape, model.param_nodes(), cfg.adam);
    model.detach_params();

    interval_sum += lv;
    ++interval_n;
    if ((step + 1) % cfg.log_interval == 0 || step + 1 == cfg.steps) {
      trace.interval_losses.push_back(interval_sum /
                                      static_cast<double>(interval_n));
      interval_sum = 0.0;
      interval_n = 0;
    }
  }
  model.train_steps += cfg.steps;
  trace.steps = cfg.steps;
  trace.final_checkpoint_digest = model_digest(model);
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return trace;
}

VelocityModel train_surrogate(const DatasetBundle& ds,
                              const SubsetManifest& subset,
                              const TrainConfig& cfg) {
  cfg.validate();
  TrainConfig scfg = cfg;
  scfg.steps = static_cast<uint64_t>(
      std::floor(cfg.surrogate_fraction * static_cast<double>(cfg.steps) + 0.5));
  VelocityModel surrogate =
      build_model(Arch::MlpS, ds.dim, derive_stream(cfg.seed, "surrogate-init"));
  train_model(surrogate, ds, subset, scfg);
  return surrogate;
}

}  // namespace fmlab
