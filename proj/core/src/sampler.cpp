#include "fmlab/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "fmlab/container.hpp"
#include "fmlab/prng.hpp"

namespace fmlab {

std::vector<double> NoiseBank::sample(size_t index) const {
  std::vector<double> x(dim);
  for (size_t c = 0; c < dim; ++c) x[c] = counter_gaussian(seed, index, c);
  return x;
}

Tensor NoiseBank::batch(const std::vector<size_t>& indices) const {
  std::vector<double> data(indices.size() * dim);
  for (size_t i = 0; i < indices.size(); ++i) {
    for (size_t c = 0; c < dim; ++c) {
      data[i * dim + c] = counter_gaussian(seed, indices[i], c);
    }
  }
  return Tensor({indices.size(), dim}, std::move(data));
}

OdeMethod ode_method_from_string(const std::string& s) {
  if (s == "euler") return OdeMethod::Euler;
  if (s == "midpoint") return OdeMethod::Midpoint;
  if (s == "rk4") return OdeMethod::Rk4;
  throw std::invalid_argument("unknown ODE method: " + s);
}

std::string ode_method_to_string(OdeMethod m) {
  switch (m) {
    case OdeMethod::Euler: return "euler";
    case OdeMethod::Midpoint: return "midpoint";
    case OdeMethod::Rk4: return "rk4";
  }
  throw std::logic_error("bad OdeMethod enum");
}

namespace {

// One batched velocity evaluation at a common time. t is clamped into [0,1]
// against roundoff at the final step.
std::vector<double> eval_velocity(VelocityModel& model, size_t n, size_t d,
                                  const std::vector<double>& state, double t) {
  double tc = std::min(std::max(t, 0.0), 1.0);
  Tensor x({n, d}, std::vector<double>(state), /*allow_nonfinite=*/true);
  Tensor tv({n}, std::vector<double>(n, tc));
  return model.velocity(x, tv).data();
}

void advance(VelocityModel& model, size_t n, size_t d,
             std::vector<double>& state, double t, double h, OdeMethod method) {
  switch (method) {
    case OdeMethod::Euler: {
      auto k1 = eval_velocity(model, n, d, state, t);
      for (size_t i = 0; i < state.size(); ++i) state[i] += h * k1[i];
      break;
    }
    case OdeMethod::Midpoint: {
      auto k1 = eval_velocity(model, n, d, state, t);
      std::vector<double> mid(state);
      for (size_t i = 0; i < mid.size(); ++i) mid[i] += 0.5 * h * k1[i];
      auto k2 = eval_velocity(model, n, d, mid, t + 0.5 * h);
      for (size_t i = 0; i < state.size(); ++i) state[i] += h * k2[i];
      break;
    }
    case OdeMethod::Rk4: {
      auto k1 = eval_velocity(model, n, d, state, t);
      std::vector<double> tmp(state.size());
      for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
      auto k2 = eval_velocity(model, n, d, tmp, t + 0.5 * h);
      for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
      auto k3 = eval_velocity(model, n, d, tmp, t + 0.5 * h);
      for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = state[i] + h * k3[i];
      auto k4 = eval_velocity(model, n, d, tmp, t + h);
      for (size_t i = 0; i < state.size(); ++i) {
        state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
      break;
    }
  }
}

void check_finite(const std::vector<double>& state, size_t step) {
  for (double v : state) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("integration produced non-finite state at step " +
                               std::to_string(step));
    }
  }
}

}  // namespace

Trajectory integrate(VelocityModel& model, const std::vector<double>& x0,
                     OdeMethod method, size_t steps) {
  if (steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
  if (x0.size() != model.data_dim) {
    throw std::invalid_argument("integrate: x0 dim mismatch");
  }
  size_t d = model.data_dim;
  Trajectory traj;
  traj.steps = steps;
  traj.dim = d;
  traj.points.reserve((steps + 1) * d);
  traj.points.insert(traj.points.end(), x0.begin(), x0.end());
  std::vector<double> state(x0);
  double h = 1.0 / static_cast<double>(steps);
  for (size_t s = 0; s < steps; ++s) {
    advance(model, 1, d, state, static_cast<double>(s) * h, h, method);
    check_finite(state, s);
    traj.points.insert(traj.points.end(), state.begin(), state.end());
  }
  return traj;
}

Tensor integrate_batch(VelocityModel& model, const Tensor& x0,
                       OdeMethod method, size_t steps) {
  if (steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
  if (x0.shape().size() != 2 || x0.cols() != model.data_dim) {
    throw std::invalid_argument("integrate: x0 shape " +
                                shape_str(x0.shape()) +
                                " does not match model dim " +
                                std::to_string(model.data_dim));
  }
  size_t n = x0.rows(), d = x0.cols();
  std::vector<double> state(x0.data());
  double h = 1.0 / static_cast<double>(steps);
  for (size_t s = 0; s < steps; ++s) {
    advance(model, n, d, state, static_cast<double>(s) * h, h, method);
    check_finite(state, s);
  }
  return Tensor({n, d}, std::move(state));
}

MatchedEndpoints generate_matched(std::vector<VelocityModel*> models,
                                  const NoiseBank& bank,
                                  const std::vector<size_t>& indices,
                                  OdeMethod method, size_t steps) {
  for (const auto* m : models) {
    if (m->data_dim != bank.dim) {
      throw std::invalid_argument("generate_matched: model dim " +
                                  std::to_string(m->data_dim) +
                                  " does not match bank dim " +
                                  std::to_string(bank.dim));
    }
  }
  MatchedEndpoints out;
  out.bank_seed = bank.seed;
  out.indices = indices;
  Tensor x0 = bank.batch(indices);
  for (auto* m : models) {
    out.model_digests.push_back(model_digest(*m));
    out.endpoints.push_back(integrate_batch(*m, x0, method, steps));
  }
  return out;
}

void save_endpoints(const Tensor& endpoints, uint64_t bank_seed,
                    const std::vector<size_t>& indices, uint64_t model_digest,
                    const std::string& path) {
  Container c;
  c.kind = "FMEP";
  c.header = {{"bank_seed", bank_seed},
              {"indices", indices},
              {"model_digest", model_digest},
              {"rows", endpoints.rows()},
              {"cols", endpoints.cols()}};
  c.payload = endpoints.data();
  write_container(path, c);
}

EndpointFile load_endpoints(const std::string& path) {
  Container c = read_container(path, "FMEP");
  EndpointFile f;
  f.bank_seed = c.header.at("bank_seed").get<uint64_t>();
  f.indices = c.header.at("indices").get<std::vector<size_t>>();
  f.model_digest = c.header.at("model_digest").get<uint64_t>();
  size_t rows = c.header.at("rows").get<size_t>();
  size_t cols = c.header.at("cols").get<size_t>();
  f.endpoints = Tensor({rows, cols}, std::move(c.payload));
  return f;
}

}  // namespace fmlab
