#pragma once

// Velocity fields u(x,t) in four architecture variants of differing capacity
// and topology:
//
//   mlp-micro   one tanh hidden layer, width 4 (oracle-sized: few dozen params)
//   mlp-s       3-layer tanh MLP, width 64, scalar t appended to x
//   mlp-xl      4 hidden layers, width 256, silu, sinusoidal t embedding
//   resmlp      residual silu blocks at width 64, sinusoidal t embedding
//   fourier-mlp random Fourier features of (x,t) feeding a silu MLP
//
// All variants zero-initialize the output layer, so a freshly built model is
// the zero field and the integrated flow at step 0 is the identity map.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fmlab/tensor.hpp"

namespace fmlab {

enum class Arch { MlpMicro, MlpS, MlpXl, ResMlp, FourierMlp };

Arch arch_from_string(const std::string& name);
std::string arch_to_string(Arch a);

struct NamedParam {
  std::string name;
  Tensor value;
};

class VelocityModel {
 public:
  Arch arch;
  size_t data_dim = 0;
  uint64_t init_seed = 0;
  uint64_t train_steps = 0;  // optimizer steps applied so far
  uint64_t config_digest = 0;
  std::vector<NamedParam> params;
  // Non-trainable tensors (fourier-mlp frequency matrix); saved in checkpoints.
  std::vector<NamedParam> constants;

  size_t param_count() const;

  // u(x,t) for a batch. x: N×d, t: N values in [0,1] (shape {N} or {N,1}).
  // When `tape` is non-null all parameters are watched on it first and the
  // output is differentiable w.r.t. them.
  Tensor velocity(const Tensor& x, const Tensor& t, Tape* tape = nullptr);

  // Node ids of params on `tape` after a taped velocity() call.
  std::vector<int> param_nodes() const;
  void detach_params();
};

// Deterministic build: He-uniform init for relu/silu variants, Xavier-uniform
// for tanh; output layer zeroed.
VelocityModel build_model(Arch arch, size_t data_dim, uint64_t init_seed);

uint64_t model_digest(const VelocityModel& m);
void save_checkpoint(const VelocityModel& m, const std::string& path);
VelocityModel load_checkpoint(const std::string& path);

}  // namespace fmlab
