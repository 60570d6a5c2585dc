#pragma once

// Seed-matched generation. A NoiseBank materializes Gaussian initial points
// on demand; sample i is a pure function of (seed, i), so banks are
// random-access and independent of access order. Fixed-step ODE integration
// of dx/dt = u(x,t) on [0,1] then transports each bank sample through a
// model's flow; feeding several models the same bank indices yields endpoint
// sets aligned sample-by-sample.

#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/model.hpp"
#include "fmlab/tensor.hpp"

namespace fmlab {

struct NoiseBank {
  uint64_t seed = 0;
  size_t dim = 0;

  std::vector<double> sample(size_t index) const;
  // Rows are bank samples at the given indices, in order.
  Tensor batch(const std::vector<size_t>& indices) const;
};

enum class OdeMethod { Euler, Midpoint, Rk4 };
OdeMethod ode_method_from_string(const std::string& s);
std::string ode_method_to_string(OdeMethod m);

struct Trajectory {
  size_t steps = 0;
  size_t dim = 0;
  std::vector<double> points;  // (steps+1) × dim, t = 0 .. 1

  const double* endpoint() const { return points.data() + steps * dim; }
};

// Single-trajectory integration with full path recording.
Trajectory integrate(VelocityModel& model, const std::vector<double>& x0,
                     OdeMethod method, size_t steps);

// Batched endpoint-only integration; x0 is N×d, returns N×d endpoints.
// Throws std::runtime_error naming the step index if the state goes
// non-finite.
Tensor integrate_batch(VelocityModel& model, const Tensor& x0,
                       OdeMethod method, size_t steps);

struct MatchedEndpoints {
  uint64_t bank_seed = 0;
  std::vector<size_t> indices;
  std::vector<uint64_t> model_digests;
  std::vector<Tensor> endpoints;  // one N×d tensor per model, row-aligned
};

MatchedEndpoints generate_matched(std::vector<VelocityModel*> models,
                                  const NoiseBank& bank,
                                  const std::vector<size_t>& indices,
                                  OdeMethod method, size_t steps);

// Endpoint-set container (.fmep): header carries bank seed, indices and the
// generating model digest.
void save_endpoints(const Tensor& endpoints, uint64_t bank_seed,
                    const std::vector<size_t>& indices, uint64_t model_digest,
                    const std::string& path);
struct EndpointFile {
  Tensor endpoints;
  uint64_t bank_seed = 0;
  std::vector<size_t> indices;
  uint64_t model_digest = 0;
};
EndpointFile load_endpoints(const std::string& path);

}  // namespace fmlab
