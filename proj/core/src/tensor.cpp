#include "fmlab/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fmlab {

namespace {

size_t shape_product(const std::vector<size_t>& shape) {
  size_t p = 1;
  for (size_t d : shape) p *= d;
  return p;
}

[[noreturn]] void shape_error(const std::string& op,
                              const std::vector<size_t>& a,
                              const std::vector<size_t>& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

}  // namespace

std::string shape_str(const std::vector<size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data,
               bool allow_nonfinite)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(std::move(data))) {
  if (shape_product(shape_) != data_->size()) {
    throw std::invalid_argument("tensor shape " + shape_str(shape_) +
                                " does not match data length " +
                                std::to_string(data_->size()));
  }
  if (!allow_nonfinite) {
    for (double v : *data_) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("non-finite entry in tensor construction");
      }
    }
  }
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
  size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("item() on non-scalar tensor of shape " +
                                shape_str(shape_));
  }
  return (*data_)[0];
}

int Tape::watch(Tensor& t) {
  if (t.tape_ == this) return t.node_;
  if (t.tape_ != nullptr) {
    throw std::invalid_argument("tensor already attached to another tape");
  }
  t.tape_ = this;
  t.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{t.size(), nullptr});
  return t.node_;
}

int Tape::add_node(size_t size, BackFn back) {
  nodes_.push_back(Node{size, std::move(back)});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(const Tensor& root) {
  if (root.tape() != this) {
    throw std::invalid_argument("backward root is not on this tape");
  }
  if (root.size() != 1) {
    throw std::invalid_argument("backward root must be scalar, got shape " +
                                shape_str(root.shape()));
  }
  grads_.assign(nodes_.size(), {});
  for (size_t i = 0; i < nodes_.size(); ++i) {
    grads_[i].assign(nodes_[i].size, 0.0);
  }
  grads_[static_cast<size_t>(root.node())][0] = 1.0;
  for (int i = root.node(); i >= 0; --i) {
    const Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back) n.back(grads_[static_cast<size_t>(i)], *this);
  }
  ran_ = true;
}

const std::vector<double>& Tape::grad(int n) const {
  if (!ran_) throw std::logic_error("grad() before backward()");
  return grads_.at(static_cast<size_t>(n));
}

double grad_sq_norm(const std::vector<std::vector<double>>& grads) {
  if (grads.empty()) {
    throw std::invalid_argument("grad_sq_norm: empty gradient map");
  }
  double acc = 0.0;
  for (const auto& g : grads) {
    for (double v : g) acc += v * v;
  }
  return acc;
}

// ---- op plumbing -----------------------------------------------------------

namespace {

Tape* common_tape(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.on_tape() && b.on_tape() && a.tape() != b.tape()) {
    throw std::invalid_argument(op + ": operands live on different tapes");
  }
  return a.on_tape() ? a.tape() : b.tape();
}

}  // namespace

struct OpBuilder {
  static Tensor make(std::vector<size_t> shape, std::vector<double> data,
                     Tape* tape, Tape::BackFn back) {
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = std::make_shared<std::vector<double>>(std::move(data));
    if (tape) {
      out.tape_ = tape;
      out.node_ = tape->add_node(out.data_->size(), std::move(back));
    }
    return out;
  }
  static std::shared_ptr<std::vector<double>> buf(const Tensor& t) {
    return t.data_;
  }
};

namespace {

// Accumulate og (*factor elementwise source) into a parent, handling the
// scalar-broadcast case where the parent is a single element.
void accum_elementwise(Tape& tape, int node, size_t parent_size,
                       const std::vector<double>& og,
                       const double* factor) {
  auto& g = tape.grad_buf(node);
  if (parent_size == og.size()) {
    for (size_t i = 0; i < og.size(); ++i) {
      g[i] += factor ? og[i] * factor[i] : og[i];
    }
  } else {  // parent is scalar
    double s = 0.0;
    for (size_t i = 0; i < og.size(); ++i) {
      s += factor ? og[i] * factor[i] : og[i];
    }
    g[0] += s;
  }
}

using BinFn = double (*)(double, double);

Tensor elementwise_bin(const std::string& name, const Tensor& a,
                       const Tensor& b, BinFn f, bool grad_a_is_one,
                       bool grad_b_uses_a, double grad_b_sign) {
  // grad conventions: add/sub have constant unit grads; mul's grads are the
  // other operand. Encoded via the flags to keep one recording path.
  const bool a_scalar = a.is_scalar();
  const bool b_scalar = b.is_scalar();
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    shape_error(name, a.shape(), b.shape());
  }
  size_t n = std::max(a.size(), b.size());
  const auto& ad = a.data();
  const auto& bd = b.data();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i] = f(ad[a_scalar ? 0 : i], bd[b_scalar ? 0 : i]);
  }
  Tape* tape = common_tape(name, a, b);
  Tape::BackFn back;
  if (tape) {
    int an = a.on_tape() ? a.node() : -1;
    int bn = b.on_tape() ? b.node() : -1;
    auto abuf = OpBuilder::buf(a);
    auto bbuf = OpBuilder::buf(b);
    size_t asz = a.size(), bsz = b.size();
    back = [=](const std::vector<double>& og, Tape& t) {
      if (an >= 0) {
        if (grad_a_is_one) {
          accum_elementwise(t, an, asz, og, nullptr);
        } else {  // mul: d/da = b
          if (bsz == og.size()) {
            accum_elementwise(t, an, asz, og, bbuf->data());
          } else {
            auto& g = t.grad_buf(an);
            for (size_t i = 0; i < og.size(); ++i) {
              g[asz == og.size() ? i : 0] += og[i] * (*bbuf)[0];
            }
          }
        }
      }
      if (bn >= 0) {
        if (!grad_b_uses_a) {  // add/sub: d/db = ±1
          auto& g = t.grad_buf(bn);
          if (bsz == og.size()) {
            for (size_t i = 0; i < og.size(); ++i) g[i] += grad_b_sign * og[i];
          } else {
            double s = 0.0;
            for (double v : og) s += v;
            g[0] += grad_b_sign * s;
          }
        } else {  // mul: d/db = a
          if (asz == og.size()) {
            accum_elementwise(t, bn, bsz, og, abuf->data());
          } else {
            auto& g = t.grad_buf(bn);
            for (size_t i = 0; i < og.size(); ++i) {
              g[bsz == og.size() ? i : 0] += og[i] * (*abuf)[0];
            }
          }
        }
      }
    };
  }
  std::vector<size_t> shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  return OpBuilder::make(std::move(shape), std::move(out), tape,
                         std::move(back));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_bin(
      "add", a, b, [](double x, double y) { return x + y; }, true, false, 1.0);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_bin(
      "sub", a, b, [](double x, double y) { return x - y; }, true, false,
      -1.0);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_bin(
      "mul", a, b, [](double x, double y) { return x * y; }, false, true, 1.0);
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
  if (a.shape().size() != 2 || bias.cols() != a.cols() ||
      bias.size() != bias.cols()) {
    shape_error("add_rowvec", a.shape(), bias.shape());
  }
  size_t n = a.rows(), k = a.cols();
  std::vector<double> out(a.data());
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < k; ++c) out[r * k + c] += bias.data()[c];
  }
  Tape* tape = common_tape("add_rowvec", a, bias);
  Tape::BackFn back;
  if (tape) {
    int an = a.on_tape() ? a.node() : -1;
    int bn = bias.on_tape() ? bias.node() : -1;
    back = [=](const std::vector<double>& og, Tape& t) {
      if (an >= 0) {
        auto& g = t.grad_buf(an);
        for (size_t i = 0; i < og.size(); ++i) g[i] += og[i];
      }
      if (bn >= 0) {
        auto& g = t.grad_buf(bn);
        for (size_t r = 0; r < n; ++r) {
          for (size_t c = 0; c < k; ++c) g[c] += og[r * k + c];
        }
      }
    };
  }
  return OpBuilder::make({n, k}, std::move(out), tape, std::move(back));
}

namespace {

// C(n×p) = A(n×m) · B(m×p), ikj order for contiguous inner loops.
void matmul_kernel(const double* a, const double* b, double* c, size_t n,
                   size_t m, size_t p) {
  for (size_t i = 0; i < n; ++i) {
    double* crow = c + i * p;
    for (size_t k = 0; k < m; ++k) {
      const double aik = a[i * m + k];
      if (aik == 0.0) continue;
      const double* brow = b + k * p;
      for (size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0]) {
    shape_error("matmul", a.shape(), b.shape());
  }
  size_t n = a.shape()[0], m = a.shape()[1], p = b.shape()[1];
  std::vector<double> out(n * p, 0.0);
  matmul_kernel(a.data().data(), b.data().data(), out.data(), n, m, p);
  Tape* tape = common_tape("matmul", a, b);
  Tape::BackFn back;
  if (tape) {
    int an = a.on_tape() ? a.node() : -1;
    int bn = b.on_tape() ? b.node() : -1;
    auto abuf = OpBuilder::buf(a);
    auto bbuf = OpBuilder::buf(b);
    back = [=](const std::vector<double>& og, Tape& t) {
      if (an >= 0) {
        // dA = dC · B^T
        auto& g = t.grad_buf(an);
        const double* bd = bbuf->data();
        for (size_t i = 0; i < n; ++i) {
          for (size_t k = 0; k < m; ++k) {
            double s = 0.0;
            const double* ogrow = og.data() + i * p;
            const double* brow = bd + k * p;
            for (size_t j = 0; j < p; ++j) s += ogrow[j] * brow[j];
            g[i * m + k] += s;
          }
        }
      }
      if (bn >= 0) {
        // dB = A^T · dC
        auto& g = t.grad_buf(bn);
        const double* ad = abuf->data();
        for (size_t i = 0; i < n; ++i) {
          const double* ogrow = og.data() + i * p;
          for (size_t k = 0; k < m; ++k) {
            const double aik = ad[i * m + k];
            if (aik == 0.0) continue;
            double* grow = g.data() + k * p;
            for (size_t j = 0; j < p; ++j) grow[j] += aik * ogrow[j];
          }
        }
      }
    };
  }
  return OpBuilder::make({n, p}, std::move(out), tape, std::move(back));
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data());
  for (double& v : out) v *= s;
  Tape* tape = a.tape();
  Tape::BackFn back;
  if (tape) {
    int an = a.node();
    back = [=](const std::vector<double>& og, Tape& t) {
      auto& g = t.grad_buf(an);
      for (size_t i = 0; i < og.size(); ++i) g[i] += s * og[i];
    };
  }
  return OpBuilder::make(a.shape(), std::move(out), tape, std::move(back));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[0] != b.shape()[0]) {
    shape_error("concat_cols", a.shape(), b.shape());
  }
  size_t n = a.rows(), ka = a.cols(), kb = b.cols();
  std::vector<double> out(n * (ka + kb));
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < ka; ++c) out[r * (ka + kb) + c] = a.data()[r * ka + c];
    for (size_t c = 0; c < kb; ++c) {
      out[r * (ka + kb) + ka + c] = b.data()[r * kb + c];
    }
  }
  Tape* tape = common_tape("concat_cols", a, b);
  Tape::BackFn back;
  if (tape) {
    int an = a.on_tape() ? a.node() : -1;
    int bn = b.on_tape() ? b.node() : -1;
    back = [=](const std::vector<double>& og, Tape& t) {
      if (an >= 0) {
        auto& g = t.grad_buf(an);
        for (size_t r = 0; r < n; ++r) {
          for (size_t c = 0; c < ka; ++c) g[r * ka + c] += og[r * (ka + kb) + c];
        }
      }
      if (bn >= 0) {
        auto& g = t.grad_buf(bn);
        for (size_t r = 0; r < n; ++r) {
          for (size_t c = 0; c < kb; ++c) {
            g[r * kb + c] += og[r * (ka + kb) + ka + c];
          }
        }
      }
    };
  }
  return OpBuilder::make({n, ka + kb}, std::move(out), tape, std::move(back));
}

namespace {

Tensor unary(const Tensor& a, double (*f)(double), double (*df)(double)) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = f(a.data()[i]);
  Tape* tape = a.tape();
  Tape::BackFn back;
  if (tape) {
    int an = a.node();
    auto abuf = OpBuilder::buf(a);
    back = [=](const std::vector<double>& og, Tape& t) {
      auto& g = t.grad_buf(an);
      for (size_t i = 0; i < og.size(); ++i) g[i] += og[i] * df((*abuf)[i]);
    };
  }
  return OpBuilder::make(a.shape(), std::move(out), tape, std::move(back));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor tanh_op(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Tensor silu(const Tensor& a) {
  return unary(
      a, [](double x) { return x * sigmoid(x); },
      [](double x) {
        double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

namespace {

Tensor reduce(const Tensor& a, bool take_mean, bool square) {
  double acc = 0.0;
  for (double v : a.data()) acc += square ? v * v : v;
  size_t n = a.size();
  if (take_mean && n > 0) acc /= static_cast<double>(n);
  Tape* tape = a.tape();
  Tape::BackFn back;
  if (tape) {
    int an = a.node();
    auto abuf = OpBuilder::buf(a);
    back = [=](const std::vector<double>& og, Tape& t) {
      auto& g = t.grad_buf(an);
      double w = og[0] * (take_mean ? 1.0 / static_cast<double>(n) : 1.0);
      for (size_t i = 0; i < n; ++i) {
        g[i] += square ? w * 2.0 * (*abuf)[i] : w;
      }
    };
  }
  return OpBuilder::make({1}, {acc}, tape, std::move(back));
}

}  // namespace

Tensor sum(const Tensor& a) { return reduce(a, false, false); }
Tensor mean(const Tensor& a) { return reduce(a, true, false); }
Tensor squared_norm(const Tensor& a) { return reduce(a, false, true); }

}  // namespace fmlab
