#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numeric>

#include "fmlab/sampler.hpp"

using namespace fmlab;

namespace {

// Zero every parameter, then set the output bias to `c` so u(x,t) == c.
VelocityModel constant_field(const std::vector<double>& c) {
  VelocityModel m = build_model(Arch::MlpMicro, c.size(), 1);
  for (auto& p : m.params) {
    std::fill(p.value.mutable_data().begin(), p.value.mutable_data().end(), 0.0);
  }
  m.params.back().value = Tensor({1, c.size()}, std::vector<double>(c));
  return m;
}

}  // namespace

TEST_CASE("zero field leaves the state at x0") {
  VelocityModel m = build_model(Arch::MlpS, 2, 3);  // fresh build: zero field
  for (OdeMethod method : {OdeMethod::Euler, OdeMethod::Midpoint,
                           OdeMethod::Rk4}) {
    Trajectory tr = integrate(m, {1.5, -2.5}, method, 16);
    CHECK(tr.endpoint()[0] == 1.5);
    CHECK(tr.endpoint()[1] == -2.5);
    CHECK(tr.points.size() == 17 * 2);
  }
}

TEST_CASE("constant field translates by exactly c for every method") {
  VelocityModel m = constant_field({2.0, -3.0});
  for (OdeMethod method : {OdeMethod::Euler, OdeMethod::Midpoint,
                           OdeMethod::Rk4}) {
    Trajectory tr = integrate(m, {0.5, 0.5}, method, 7);
    CHECK(tr.endpoint()[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(tr.endpoint()[1] == doctest::Approx(-2.5).epsilon(1e-12));
  }
}

TEST_CASE("solver error ratios match orders 1/2/4 on a nonlinear field") {
  // A generic smooth field: mlp-micro with hand-set nonzero weights.
  VelocityModel m = build_model(Arch::MlpMicro, 2, 5);
  double vals = 0.3;
  for (auto& p : m.params) {
    for (double& v : p.value.mutable_data()) {
      v = std::sin(vals) * 1.4;  // deterministic, nonzero, in tanh's bend
      vals += 0.7;
    }
  }
  std::vector<double> x0 = {0.2, -0.4};
  Trajectory ref = integrate(m, x0, OdeMethod::Rk4, 4096);

  auto err = [&](OdeMethod method, size_t steps) {
    Trajectory tr = integrate(m, x0, method, steps);
    double dx = tr.endpoint()[0] - ref.endpoint()[0];
    double dy = tr.endpoint()[1] - ref.endpoint()[1];
    return std::sqrt(dx * dx + dy * dy);
  };

  // Halving the step should scale the error by 2^order.
  double r_euler = err(OdeMethod::Euler, 16) / err(OdeMethod::Euler, 32);
  double r_mid = err(OdeMethod::Midpoint, 16) / err(OdeMethod::Midpoint, 32);
  double r_rk4 = err(OdeMethod::Rk4, 8) / err(OdeMethod::Rk4, 16);
  CHECK(r_euler == doctest::Approx(2.0).epsilon(0.20));
  CHECK(r_mid == doctest::Approx(4.0).epsilon(0.20));
  CHECK(r_rk4 == doctest::Approx(16.0).epsilon(0.20));
}

TEST_CASE("noise bank is pure and order-independent") {
  NoiseBank bank{42, 2};
  std::vector<double> s5 = bank.sample(5);
  std::vector<double> s0 = bank.sample(0);
  CHECK(bank.sample(5) == s5);  // unaffected by the interleaved call
  Tensor batch = bank.batch({5, 0, 5});
  CHECK(batch.data()[0] == s5[0]);
  CHECK(batch.data()[1] == s5[1]);
  CHECK(batch.data()[2] == s0[0]);
  CHECK(batch.data()[4] == s5[0]);
  NoiseBank other{43, 2};
  CHECK(other.sample(5) != s5);
}

TEST_CASE("batched integration matches single trajectories") {
  VelocityModel m = build_model(Arch::MlpMicro, 2, 5);
  double vals = 0.1;
  for (auto& p : m.params) {
    for (double& v : p.value.mutable_data()) {
      v = std::cos(vals);
      vals += 0.9;
    }
  }
  NoiseBank bank{7, 2};
  std::vector<size_t> idx = {0, 1, 2, 3};
  Tensor eps = integrate_batch(m, bank.batch(idx), OdeMethod::Midpoint, 20);
  for (size_t i = 0; i < idx.size(); ++i) {
    Trajectory tr = integrate(m, bank.sample(idx[i]), OdeMethod::Midpoint, 20);
    CHECK(eps.data()[2 * i] == doctest::Approx(tr.endpoint()[0]).epsilon(1e-12));
    CHECK(eps.data()[2 * i + 1] ==
          doctest::Approx(tr.endpoint()[1]).epsilon(1e-12));
  }
}

TEST_CASE("matched generation shares one bank across models") {
  VelocityModel a = constant_field({1.0, 0.0});
  VelocityModel b = constant_field({0.0, 1.0});
  NoiseBank bank{99, 2};
  MatchedEndpoints eps =
      generate_matched({&a, &b}, bank, {0, 1, 2}, OdeMethod::Rk4, 4);
  REQUIRE(eps.endpoints.size() == 2);
  for (size_t i = 0; i < 3; ++i) {
    std::vector<double> x0 = bank.sample(i);
    CHECK(eps.endpoints[0].data()[2 * i] == doctest::Approx(x0[0] + 1.0));
    CHECK(eps.endpoints[0].data()[2 * i + 1] == doctest::Approx(x0[1]));
    CHECK(eps.endpoints[1].data()[2 * i] == doctest::Approx(x0[0]));
    CHECK(eps.endpoints[1].data()[2 * i + 1] == doctest::Approx(x0[1] + 1.0));
  }
  CHECK(eps.bank_seed == 99);
}

TEST_CASE("endpoint file roundtrip") {
  const char* path = "test_sampler_tmp.fmep";
  Tensor eps({2, 2}, {1.0, 2.0, 3.0, 4.0});
  save_endpoints(eps, 5, {7, 9}, 0xabcd, path);
  EndpointFile back = load_endpoints(path);
  CHECK(back.endpoints.data() == eps.data());
  CHECK(back.bank_seed == 5);
  CHECK(back.indices == std::vector<size_t>{7, 9});
  CHECK(back.model_digest == 0xabcd);
  std::remove(path);
}

TEST_CASE("method names roundtrip and bad input throws") {
  for (const char* n : {"euler", "midpoint", "rk4"}) {
    CHECK(ode_method_to_string(ode_method_from_string(n)) == n);
  }
  CHECK_THROWS(ode_method_from_string("rk45"));
  VelocityModel m = build_model(Arch::MlpS, 2, 1);
  CHECK_THROWS(integrate(m, {1.0}, OdeMethod::Euler, 4));  // dim mismatch
}
