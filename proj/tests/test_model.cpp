#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "fmlab/model.hpp"

using namespace fmlab;

TEST_CASE("parameter counts") {
  VelocityModel micro = build_model(Arch::MlpMicro, 2, 1);
  VelocityModel s = build_model(Arch::MlpS, 2, 1);
  VelocityModel xl = build_model(Arch::MlpXl, 2, 1);
  // mlp-micro: (3*4+4) + (4*2+2) = 26; well under the oracle budget of 100.
  CHECK(micro.param_count() == 26);
  // mlp-s: (3*64+64) + (64*64+64) + (64*2+2) = 4546.
  CHECK(s.param_count() == 4546);
  // Capacity gap: xl holds more than 5x the mlp-s parameters.
  CHECK(xl.param_count() > 5 * s.param_count());
}

TEST_CASE("fresh models are the zero field") {
  for (Arch a : {Arch::MlpMicro, Arch::MlpS, Arch::MlpXl, Arch::ResMlp,
                 Arch::FourierMlp}) {
    VelocityModel m = build_model(a, 2, 7);
    Tensor x({3, 2}, {0.5, -1.0, 2.0, 0.0, -3.0, 1.5});
    Tensor t({3}, {0.0, 0.5, 1.0});
    Tensor u = m.velocity(x, t);
    for (double v : u.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("build is deterministic in the init seed") {
  for (Arch a : {Arch::MlpS, Arch::FourierMlp}) {
    CHECK(model_digest(build_model(a, 2, 5)) ==
          model_digest(build_model(a, 2, 5)));
    CHECK(model_digest(build_model(a, 2, 5)) !=
          model_digest(build_model(a, 2, 6)));
  }
}

TEST_CASE("batched velocity equals per-row velocity") {
  for (Arch a : {Arch::MlpS, Arch::MlpXl, Arch::ResMlp, Arch::FourierMlp}) {
    VelocityModel m = build_model(a, 2, 11);
    // Give the zero output layer some signal first.
    for (auto& p : m.params) {
      for (size_t j = 0; j < p.value.size(); ++j) {
        if (p.value.data()[j] == 0.0) {
          p.value.mutable_data()[j] = 0.01 * static_cast<double>(j % 7) - 0.02;
        }
      }
    }
    Tensor x({3, 2}, {0.5, -1.0, 2.0, 0.1, -0.4, 0.9});
    Tensor t({3}, {0.1, 0.5, 0.9});
    Tensor batch = m.velocity(x, t);
    for (size_t i = 0; i < 3; ++i) {
      Tensor xi({1, 2}, {x.data()[2 * i], x.data()[2 * i + 1]});
      Tensor ti({1}, {t.data()[i]});
      Tensor ui = m.velocity(xi, ti);
      CHECK(ui.data()[0] == doctest::Approx(batch.data()[2 * i]).epsilon(1e-12));
      CHECK(ui.data()[1] ==
            doctest::Approx(batch.data()[2 * i + 1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("velocity validates t domain and shapes") {
  VelocityModel m = build_model(Arch::MlpS, 2, 1);
  Tensor x({1, 2}, {0.0, 0.0});
  CHECK_THROWS(m.velocity(x, Tensor({1}, {1.5})));
  CHECK_THROWS(m.velocity(x, Tensor({1}, {-0.1})));
  CHECK_THROWS(m.velocity(x, Tensor({2}, {0.5, 0.5})));
  CHECK_THROWS(m.velocity(Tensor({1, 3}, {0.0, 0.0, 0.0}), Tensor({1}, {0.5})));
}

TEST_CASE("checkpoint roundtrip preserves the model bit-for-bit") {
  const char* path = "test_model_tmp.fmck";
  for (Arch a : {Arch::MlpS, Arch::FourierMlp}) {
    VelocityModel m = build_model(a, 2, 31);
    m.train_steps = 1234;
    m.config_digest = 99;
    save_checkpoint(m, path);
    VelocityModel back = load_checkpoint(path);
    CHECK(model_digest(back) == model_digest(m));
    CHECK(back.train_steps == 1234);
    CHECK(back.arch == a);
    CHECK(back.constants.size() == m.constants.size());
  }
  std::remove(path);
}

TEST_CASE("arch name mapping is a bijection") {
  for (const char* n :
       {"mlp-micro", "mlp-s", "mlp-xl", "resmlp", "fourier-mlp"}) {
    CHECK(arch_to_string(arch_from_string(n)) == n);
  }
  CHECK_THROWS(arch_from_string("cnn"));
}
