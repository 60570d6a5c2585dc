#pragma once

// Dense f64 tensors with define-by-run reverse-mode differentiation.
//
// A Tape records one forward pass; node indices grow in execution order, so
// reverse index order is a valid topological order for the backward sweep.
// Tensors hold their data in a shared buffer; backward closures capture those
// buffers, so forward values stay alive for the life of the tape.
//
// Only tensors explicitly watch()ed (model parameters) or produced from taped
// inputs participate; everything else is a constant and receives no gradient.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace fmlab {

class Tape;

class Tensor {
 public:
  Tensor() = default;
  // Throws std::invalid_argument if shape product != data size, or if any
  // entry is non-finite and allow_nonfinite is false.
  Tensor(std::vector<size_t> shape, std::vector<double> data,
         bool allow_nonfinite = false);

  static Tensor zeros(std::vector<size_t> shape);
  static Tensor scalar(double v);

  const std::vector<size_t>& shape() const { return shape_; }
  const std::vector<double>& data() const { return *data_; }
  std::vector<double>& mutable_data() { return *data_; }
  size_t size() const { return data_ ? data_->size() : 0; }
  size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  bool is_scalar() const { return size() == 1; }
  // Value of a single-element tensor; throws otherwise.
  double item() const;

  bool on_tape() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }
  void detach() {
    tape_ = nullptr;
    node_ = -1;
  }

 private:
  friend class Tape;
  friend struct OpBuilder;
  std::vector<size_t> shape_;
  std::shared_ptr<std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

std::string shape_str(const std::vector<size_t>& s);

class Tape {
 public:
  using BackFn = std::function<void(const std::vector<double>& out_grad, Tape&)>;

  // Registers a leaf (typically a parameter). Idempotent per tensor instance.
  int watch(Tensor& t);

  // Records an interior node. Only called by op implementations.
  int add_node(size_t size, BackFn back);

  // Runs the reverse sweep from a scalar root on this tape. Populates a
  // gradient for every node; nodes unreachable from the root get exact zeros.
  // Throws std::invalid_argument if root is not a scalar on this tape.
  void backward(const Tensor& root);

  // Gradient of the last backward() root w.r.t. node `n`, flat layout.
  const std::vector<double>& grad(int n) const;
  std::vector<double>& grad_buf(int n) { return grads_[static_cast<size_t>(n)]; }

  size_t num_nodes() const { return nodes_.size(); }
  bool has_run() const { return ran_; }

 private:
  struct Node {
    size_t size;
    BackFn back;  // null for leaves
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool ran_ = false;
};

// Sum of squares over every gradient in `grads`. Throws on empty input.
double grad_sq_norm(const std::vector<std::vector<double>>& grads);

// ---- primitive ops ---------------------------------------------------------
// Elementwise ops accept equal shapes or one single-element operand
// (scalar broadcast). All ops record onto the tape of any taped input; taping
// two inputs from different tapes is an error.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// a: N×k, bias: k (or 1×k) added to every row.
Tensor add_rowvec(const Tensor& a, const Tensor& bias);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// Horizontal concatenation of two 2-D tensors with equal row counts.
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor tanh_op(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor squared_norm(const Tensor& a);

}  // namespace fmlab
