#include "fmlab/model.hpp"

#include <cmath>
#include <stdexcept>

#include "fmlab/container.hpp"
#include "fmlab/prng.hpp"

namespace fmlab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr size_t kSinusoidalDim = 16;
constexpr size_t kFourierFeatures = 32;

Tensor uniform_init(Rng& rng, size_t rows, size_t cols, double limit) {
  std::vector<double> d(rows * cols);
  for (double& v : d) v = (2.0 * rng.next_double() - 1.0) * limit;
  return Tensor({rows, cols}, std::move(d));
}

struct LayerPlan {
  size_t in, out;
  bool zero;  // output layer
};

void append_linear(VelocityModel& m, Rng& rng, const std::string& name,
                   const LayerPlan& p, bool tanh_family) {
  double limit;
  if (p.zero) {
    limit = 0.0;
  } else if (tanh_family) {
    limit = std::sqrt(6.0 / static_cast<double>(p.in + p.out));  // Xavier
  } else {
    limit = std::sqrt(6.0 / static_cast<double>(p.in));  // He
  }
  m.params.push_back({name + ".w", limit == 0.0
                                       ? Tensor::zeros({p.in, p.out})
                                       : uniform_init(rng, p.in, p.out, limit)});
  m.params.push_back({name + ".b", Tensor::zeros({1, p.out})});
}

// Sinusoidal embedding of t, frequencies 2^j * pi, j = 0..dim/2-1.
Tensor time_embed_sinusoidal(const Tensor& t) {
  size_t n = t.size();
  std::vector<double> out(n * kSinusoidalDim);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < kSinusoidalDim / 2; ++j) {
      double w = std::ldexp(kPi, static_cast<int>(j));  // pi * 2^j
      out[i * kSinusoidalDim + 2 * j] = std::sin(w * t.data()[i]);
      out[i * kSinusoidalDim + 2 * j + 1] = std::cos(w * t.data()[i]);
    }
  }
  return Tensor({n, kSinusoidalDim}, std::move(out));
}

}  // namespace

Arch arch_from_string(const std::string& name) {
  if (name == "mlp-micro") return Arch::MlpMicro;
  if (name == "mlp-s") return Arch::MlpS;
  if (name == "mlp-xl") return Arch::MlpXl;
  if (name == "resmlp") return Arch::ResMlp;
  if (name == "fourier-mlp") return Arch::FourierMlp;
  throw std::invalid_argument("unknown arch: " + name);
}

std::string arch_to_string(Arch a) {
  switch (a) {
    case Arch::MlpMicro: return "mlp-micro";
    case Arch::MlpS: return "mlp-s";
    case Arch::MlpXl: return "mlp-xl";
    case Arch::ResMlp: return "resmlp";
    case Arch::FourierMlp: return "fourier-mlp";
  }
  throw std::logic_error("bad arch enum");
}

size_t VelocityModel::param_count() const {
  size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

VelocityModel build_model(Arch arch, size_t data_dim, uint64_t init_seed) {
  if (data_dim < 1) throw std::invalid_argument("data_dim must be >= 1");
  VelocityModel m;
  m.arch = arch;
  m.data_dim = data_dim;
  m.init_seed = init_seed;
  Rng rng(derive_stream(init_seed, "model-init"));
  const size_t d = data_dim;
  switch (arch) {
    case Arch::MlpMicro: {
      // [d+1 -> 4 -> d], tanh; small enough for finite-difference oracles.
      append_linear(m, rng, "l0", {d + 1, 4, false}, true);
      append_linear(m, rng, "out", {4, d, true}, true);
      break;
    }
    case Arch::MlpS: {
      // x concat scalar t: [d+1 -> 64 -> 64 -> d], tanh.
      append_linear(m, rng, "l0", {d + 1, 64, false}, true);
      append_linear(m, rng, "l1", {64, 64, false}, true);
      append_linear(m, rng, "out", {64, d, true}, true);
      break;
    }
    case Arch::MlpXl: {
      // 4 hidden layers of width 256.
      append_linear(m, rng, "l0", {d + kSinusoidalDim, 256, false}, false);
      for (int i = 1; i <= 3; ++i) {
        append_linear(m, rng, "l" + std::to_string(i), {256, 256, false},
                      false);
      }
      append_linear(m, rng, "out", {256, d, true}, false);
      break;
    }
    case Arch::ResMlp: {
      append_linear(m, rng, "proj", {d + kSinusoidalDim, 64, false}, false);
      for (int b = 0; b < 3; ++b) {
        std::string base = "block" + std::to_string(b);
        append_linear(m, rng, base + ".fc1", {64, 64, false}, false);
        append_linear(m, rng, base + ".fc2", {64, 64, false}, false);
      }
      append_linear(m, rng, "out", {64, d, true}, false);
      break;
    }
    case Arch::FourierMlp: {
      // Fixed random frequency matrix over [x; t].
      double sigma = 2.0;
      std::vector<double> freq((d + 1) * kFourierFeatures);
      Rng frng(derive_stream(init_seed, "fourier-freq"));
      for (double& v : freq) v = sigma * frng.next_gaussian();
      m.constants.push_back(
          {"freq", Tensor({d + 1, kFourierFeatures}, std::move(freq))});
      append_linear(m, rng, "l0", {2 * kFourierFeatures, 64, false}, false);
      append_linear(m, rng, "l1", {64, 64, false}, false);
      append_linear(m, rng, "out", {64, d, true}, false);
      break;
    }
  }
  return m;
}

namespace {

Tensor linear(const VelocityModel& m, size_t layer_idx, const Tensor& h) {
  const Tensor& w = m.params[2 * layer_idx].value;
  const Tensor& b = m.params[2 * layer_idx + 1].value;
  return add_rowvec(matmul(h, w), b);
}

}  // namespace

Tensor VelocityModel::velocity(const Tensor& x, const Tensor& t, Tape* tape) {
  if (x.shape().size() != 2 || x.cols() != data_dim) {
    throw std::invalid_argument("velocity: x shape " + shape_str(x.shape()) +
                                " does not match data_dim " +
                                std::to_string(data_dim));
  }
  if (t.size() != x.rows()) {
    throw std::invalid_argument("velocity: t has " + std::to_string(t.size()) +
                                " entries for batch of " +
                                std::to_string(x.rows()));
  }
  for (double v : t.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("velocity: t=" + std::to_string(v) +
                                  " outside the interpolant domain [0,1]");
    }
  }
  if (tape) {
    for (auto& p : params) {
      if (p.value.tape() != tape) p.value.detach();
      tape->watch(p.value);
    }
  }
  size_t n = x.rows();
  Tensor tcol({n, 1}, std::vector<double>(t.data()));

  switch (arch) {
    case Arch::MlpMicro: {
      Tensor h = tanh_op(linear(*this, 0, concat_cols(x, tcol)));
      return linear(*this, 1, h);
    }
    case Arch::MlpS: {
      Tensor h = concat_cols(x, tcol);
      h = tanh_op(linear(*this, 0, h));
      h = tanh_op(linear(*this, 1, h));
      return linear(*this, 2, h);
    }
    case Arch::MlpXl: {
      Tensor h = concat_cols(x, time_embed_sinusoidal(tcol));
      for (size_t l = 0; l < 4; ++l) h = silu(linear(*this, l, h));
      return linear(*this, 4, h);
    }
    case Arch::ResMlp: {
      Tensor h = silu(linear(*this, 0, concat_cols(x, time_embed_sinusoidal(tcol))));
      for (size_t b = 0; b < 3; ++b) {
        Tensor inner = silu(linear(*this, 1 + 2 * b, h));
        h = add(h, linear(*this, 2 + 2 * b, inner));
      }
      return linear(*this, 7, h);
    }
    case Arch::FourierMlp: {
      // Features are a pure function of (x, t); computed off-tape.
      const Tensor& freq = constants[0].value;
      Tensor z = concat_cols(x, tcol);
      Tensor proj = matmul(z, freq);
      std::vector<double> feats(n * 2 * kFourierFeatures);
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < kFourierFeatures; ++j) {
          double v = proj.data()[i * kFourierFeatures + j];
          feats[i * 2 * kFourierFeatures + j] = std::cos(v);
          feats[i * 2 * kFourierFeatures + kFourierFeatures + j] = std::sin(v);
        }
      }
      Tensor h({n, 2 * kFourierFeatures}, std::move(feats));
      h = silu(linear(*this, 0, h));
      h = silu(linear(*this, 1, h));
      return linear(*this, 2, h);
    }
  }
  throw std::logic_error("bad arch enum");
}

std::vector<int> VelocityModel::param_nodes() const {
  std::vector<int> nodes;
  nodes.reserve(params.size());
  for (const auto& p : params) nodes.push_back(p.value.node());
  return nodes;
}

void VelocityModel::detach_params() {
  for (auto& p : params) p.value.detach();
}

namespace {

Container to_container(const VelocityModel& m) {
  Container c;
  c.kind = "FMCK";
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& p : m.params) {
    plist.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  nlohmann::json clist = nlohmann::json::array();
  for (const auto& p : m.constants) {
    clist.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  c.header = {{"arch", arch_to_string(m.arch)},
              {"data_dim", m.data_dim},
              {"init_seed", m.init_seed},
              {"train_steps", m.train_steps},
              {"config_digest", m.config_digest},
              {"params", plist},
              {"constants", clist}};
  for (const auto& p : m.params) {
    c.payload.insert(c.payload.end(), p.value.data().begin(),
                     p.value.data().end());
  }
  for (const auto& p : m.constants) {
    c.payload.insert(c.payload.end(), p.value.data().begin(),
                     p.value.data().end());
  }
  return c;
}

}  // namespace

uint64_t model_digest(const VelocityModel& m) {
  return container_digest(to_container(m));
}

void save_checkpoint(const VelocityModel& m, const std::string& path) {
  write_container(path, to_container(m));
}

VelocityModel load_checkpoint(const std::string& path) {
  Container c = read_container(path, "FMCK");
  VelocityModel m;
  m.arch = arch_from_string(c.header.at("arch").get<std::string>());
  m.data_dim = c.header.at("data_dim").get<size_t>();
  m.init_seed = c.header.at("init_seed").get<uint64_t>();
  m.train_steps = c.header.at("train_steps").get<uint64_t>();
  m.config_digest = c.header.at("config_digest").get<uint64_t>();
  size_t off = 0;
  auto take = [&](const nlohmann::json& spec) {
    auto shape = spec.at("shape").get<std::vector<size_t>>();
    size_t n = 1;
    for (size_t d : shape) n *= d;
    if (off + n > c.payload.size()) {
      throw std::runtime_error("checkpoint payload truncated: " + path);
    }
    Tensor t(shape, std::vector<double>(c.payload.begin() + off,
                                        c.payload.begin() + off + n));
    off += n;
    return NamedParam{spec.at("name").get<std::string>(), std::move(t)};
  };
  for (const auto& spec : c.header.at("params")) m.params.push_back(take(spec));
  for (const auto& spec : c.header.at("constants")) {
    m.constants.push_back(take(spec));
  }
  if (off != c.payload.size()) {
    throw std::runtime_error("checkpoint payload has trailing data: " + path);
  }
  return m;
}

}  // namespace fmlab
