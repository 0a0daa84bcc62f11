#include "ptaloc/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ptaloc/error.hpp"
#include "ptaloc/kernels.hpp"

namespace ptaloc::ad {

namespace {

using Node = Tape::Node;

Node make_node(const char* op, Shape shape, bool complex, std::initializer_list<const Value*> inputs) {
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.complex = complex;
  for (const Value* v : inputs) {
    n.inputs.push_back(v->id());
    n.requires_grad = n.requires_grad || v->requires_grad();
  }
  const std::size_t count = numel(n.shape);
  if (complex) {
    n.cx.resize(count);
  } else {
    n.re.resize(count);
  }
  return n;
}

void same_tape(const Value& a, const Value& b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) throw Error("autodiff: operands live on different tapes");
}

void require_real(const Value& a, const char* op) {
  if (a.is_complex()) throw Error(std::string("autodiff: ") + op + " expects a real operand");
}

void require_complex(const Value& a, const char* op) {
  if (!a.is_complex()) throw Error(std::string("autodiff: ") + op + " expects a complex operand");
}

void require_rank(const Value& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank) {
    throw Error(std::string("autodiff: ") + op + " expects rank " + std::to_string(rank) + ", got " +
                to_string(a.shape()));
  }
}

// Broadcast rule for binary elementwise ops: equal shapes, or one side scalar.
Shape binary_shape(const Value& a, const Value& b, const char* op) {
  same_tape(a, b);
  if (a.is_complex() != b.is_complex()) throw Error(std::string("autodiff: ") + op + " dtype mismatch");
  if (a.shape() == b.shape()) return a.shape();
  if (b.size() == 1) return a.shape();
  if (a.size() == 1) return b.shape();
  throw Error(std::string("autodiff: ") + op + " shape mismatch " + to_string(a.shape()) + " vs " +
              to_string(b.shape()));
}

// Accumulates an elementwise gradient into an input that may be broadcast.
template <typename T>
void accumulate(std::vector<T>& dst, const std::vector<T>& src, T factor = T(1)) {
  if (dst.size() == src.size()) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += factor * src[i];
  } else {
    T total{};
    for (const T& s : src) total += s;
    dst[0] += factor * total;
  }
}

template <typename Fwd, typename Deriv>
Value unary_real(const Value& a, const char* op, Fwd fwd, Deriv deriv) {
  require_real(a, op);
  Node n = make_node(op, a.shape(), false, {&a});
  const auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) n.re[i] = fwd(x[i]);
  if (n.requires_grad) {
    n.backward = [deriv](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      if (!in.requires_grad) return;
      for (std::size_t i = 0; i < out.re.size(); ++i) in.grad_re[i] += out.grad_re[i] * deriv(in.re[i], out.re[i]);
    };
  }
  return a.tape().record(std::move(n));
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// ---- Value ----------------------------------------------------------------

const Shape& Value::shape() const { return tape_->node(id_).shape; }
std::size_t Value::size() const { return numel(shape()); }
bool Value::is_complex() const { return tape_->node(id_).complex; }
bool Value::requires_grad() const { return tape_->node(id_).requires_grad; }
std::span<const double> Value::data() const { return tape_->node(id_).re; }
std::span<const cplx> Value::cdata() const { return tape_->node(id_).cx; }

double Value::item() const {
  const auto& n = tape_->node(id_);
  if (n.complex || n.re.size() != 1) throw Error("autodiff: item() needs a real scalar");
  return n.re[0];
}

std::span<const double> Value::grad() const { return tape_->node(id_).grad_re; }
std::span<const cplx> Value::cgrad() const { return tape_->node(id_).grad_cx; }

// ---- Tape -----------------------------------------------------------------

Value Tape::constant(Shape shape, std::vector<double> data) {
  if (numel(shape) != data.size()) throw Error("autodiff: constant size does not match shape");
  Node n;
  n.op = "constant";
  n.shape = std::move(shape);
  n.re = std::move(data);
  return record(std::move(n));
}

Value Tape::constant(Shape shape, std::vector<cplx> data) {
  if (numel(shape) != data.size()) throw Error("autodiff: constant size does not match shape");
  Node n;
  n.op = "constant";
  n.shape = std::move(shape);
  n.complex = true;
  n.cx = std::move(data);
  return record(std::move(n));
}

Value Tape::parameter(Shape shape, std::vector<double> data) {
  if (numel(shape) != data.size()) throw Error("autodiff: parameter size does not match shape");
  Node n;
  n.op = "parameter";
  n.shape = std::move(shape);
  n.re = std::move(data);
  n.requires_grad = true;
  return record(std::move(n));
}

Value Tape::record(Node node) {
  const std::size_t id = nodes_.size();
  for (auto in : node.inputs) {
    // Inputs always precede their consumer; a violation would mean a cycle.
    assert(in < id);
    if (in >= id) throw Error("autodiff: tape order violated");
  }
  nodes_.push_back(std::move(node));
  return Value(this, id);
}

void Tape::backward(const Value& loss) {
  if (&loss.tape() != this) throw Error("autodiff: loss belongs to another tape");
  const Node& ln = nodes_[loss.id()];
  if (ln.complex) throw Error("autodiff: loss must be real");
  if (ln.re.size() != 1) throw Error("autodiff: loss must be a scalar, got shape " + to_string(ln.shape));

  for (auto& n : nodes_) {
    if (!n.requires_grad) continue;
    if (n.complex) {
      n.grad_cx.assign(n.cx.size(), cplx{});
    } else {
      n.grad_re.assign(n.re.size(), 0.0);
    }
  }
  if (!ln.requires_grad) return;
  nodes_[loss.id()].grad_re[0] = 1.0;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.backward) n.backward(*this, id);
  }
}

// ---- Elementwise arithmetic -------------------------------------------------

Value add(const Value& a, const Value& b) {
  Node n = make_node("add", binary_shape(a, b, "add"), a.is_complex(), {&a, &b});
  const std::size_t count = numel(n.shape);
  if (n.complex) {
    const auto x = a.cdata(), y = b.cdata();
    for (std::size_t i = 0; i < count; ++i) n.cx[i] = x[x.size() == 1 ? 0 : i] + y[y.size() == 1 ? 0 : i];
  } else {
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < count; ++i) n.re[i] = x[x.size() == 1 ? 0 : i] + y[y.size() == 1 ? 0 : i];
  }
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      for (auto in_id : out.inputs) {
        Node& in = t.node(in_id);
        if (!in.requires_grad) continue;
        if (out.complex) {
          accumulate(in.grad_cx, out.grad_cx);
        } else {
          accumulate(in.grad_re, out.grad_re);
        }
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value sub(const Value& a, const Value& b) {
  Node n = make_node("sub", binary_shape(a, b, "sub"), a.is_complex(), {&a, &b});
  const std::size_t count = numel(n.shape);
  if (n.complex) {
    const auto x = a.cdata(), y = b.cdata();
    for (std::size_t i = 0; i < count; ++i) n.cx[i] = x[x.size() == 1 ? 0 : i] - y[y.size() == 1 ? 0 : i];
  } else {
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < count; ++i) n.re[i] = x[x.size() == 1 ? 0 : i] - y[y.size() == 1 ? 0 : i];
  }
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      for (std::size_t k = 0; k < 2; ++k) {
        Node& in = t.node(out.inputs[k]);
        if (!in.requires_grad) continue;
        if (out.complex) {
          accumulate(in.grad_cx, out.grad_cx, cplx(k == 0 ? 1.0 : -1.0));
        } else {
          accumulate(in.grad_re, out.grad_re, k == 0 ? 1.0 : -1.0);
        }
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value mul(const Value& a, const Value& b) {
  Node n = make_node("mul", binary_shape(a, b, "mul"), a.is_complex(), {&a, &b});
  const std::size_t count = numel(n.shape);
  if (n.complex) {
    const auto x = a.cdata(), y = b.cdata();
    for (std::size_t i = 0; i < count; ++i) n.cx[i] = x[x.size() == 1 ? 0 : i] * y[y.size() == 1 ? 0 : i];
  } else {
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < count; ++i) n.re[i] = x[x.size() == 1 ? 0 : i] * y[y.size() == 1 ? 0 : i];
  }
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      const std::size_t count = out.complex ? out.cx.size() : out.re.size();
      for (std::size_t k = 0; k < 2; ++k) {
        Node& in = t.node(out.inputs[k]);
        const Node& other = t.node(out.inputs[1 - k]);
        if (!in.requires_grad) continue;
        const bool in_b = (out.complex ? in.cx.size() : in.re.size()) == 1 && count != 1;
        const bool other_b = (out.complex ? other.cx.size() : other.re.size()) == 1 && count != 1;
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t oi = other_b ? 0 : i;
          const std::size_t ii = in_b ? 0 : i;
          if (out.complex) {
            in.grad_cx[ii] += out.grad_cx[i] * other.cx[oi];
          } else {
            in.grad_re[ii] += out.grad_re[i] * other.re[oi];
          }
        }
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value scale(const Value& a, double c) {
  Node n = make_node("scale", a.shape(), a.is_complex(), {&a});
  if (n.complex) {
    const auto x = a.cdata();
    for (std::size_t i = 0; i < x.size(); ++i) n.cx[i] = x[i] * c;
  } else {
    const auto x = a.data();
    for (std::size_t i = 0; i < x.size(); ++i) n.re[i] = x[i] * c;
  }
  if (n.requires_grad) {
    n.backward = [c](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      if (out.complex) {
        for (std::size_t i = 0; i < out.cx.size(); ++i) in.grad_cx[i] += out.grad_cx[i] * c;
      } else {
        for (std::size_t i = 0; i < out.re.size(); ++i) in.grad_re[i] += out.grad_re[i] * c;
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value affine(const Value& a, double c, double shift) {
  require_real(a, "affine");
  Node n = make_node("affine", a.shape(), false, {&a});
  const auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) n.re[i] = x[i] * c + shift;
  if (n.requires_grad) {
    n.backward = [c](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t i = 0; i < out.re.size(); ++i) in.grad_re[i] += out.grad_re[i] * c;
    };
  }
  return a.tape().record(std::move(n));
}

Value mul_const(const Value& a, std::span<const double> factors) {
  if (factors.size() != a.size()) throw Error("autodiff: mul_const size mismatch");
  Node n = make_node("mul_const", a.shape(), a.is_complex(), {&a});
  if (n.complex) {
    const auto x = a.cdata();
    for (std::size_t i = 0; i < x.size(); ++i) n.cx[i] = x[i] * factors[i];
  } else {
    const auto x = a.data();
    for (std::size_t i = 0; i < x.size(); ++i) n.re[i] = x[i] * factors[i];
  }
  if (n.requires_grad) {
    n.backward = [f = std::vector<double>(factors.begin(), factors.end())](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      if (out.complex) {
        for (std::size_t i = 0; i < f.size(); ++i) in.grad_cx[i] += out.grad_cx[i] * f[i];
      } else {
        for (std::size_t i = 0; i < f.size(); ++i) in.grad_re[i] += out.grad_re[i] * f[i];
      }
    };
  }
  return a.tape().record(std::move(n));
}

// ---- Complex ----------------------------------------------------------------

Value expj(const Value& a) {
  require_real(a, "expj");
  Node n = make_node("expj", a.shape(), true, {&a});
  const auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) n.cx[i] = cplx(std::cos(x[i]), std::sin(x[i]));
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      // dL/da = Re(G * j z) = -Re(G) Im(z) - Im(G) Re(z)
      for (std::size_t i = 0; i < out.cx.size(); ++i) {
        const cplx g = out.grad_cx[i], z = out.cx[i];
        in.grad_re[i] += -g.real() * z.imag() - g.imag() * z.real();
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value complex_exp(const Value& a) {
  require_complex(a, "complex_exp");
  Node n = make_node("complex_exp", a.shape(), true, {&a});
  const auto x = a.cdata();
  for (std::size_t i = 0; i < x.size(); ++i) n.cx[i] = std::exp(x[i]);
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t i = 0; i < out.cx.size(); ++i) in.grad_cx[i] += out.grad_cx[i] * out.cx[i];
    };
  }
  return a.tape().record(std::move(n));
}

Value conj(const Value& a) {
  require_complex(a, "conj");
  Node n = make_node("conj", a.shape(), true, {&a});
  const auto x = a.cdata();
  for (std::size_t i = 0; i < x.size(); ++i) n.cx[i] = std::conj(x[i]);
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t i = 0; i < out.cx.size(); ++i) in.grad_cx[i] += std::conj(out.grad_cx[i]);
    };
  }
  return a.tape().record(std::move(n));
}

Value abs_squared(const Value& a) {
  require_complex(a, "abs_squared");
  Node n = make_node("abs_squared", a.shape(), false, {&a});
  const auto x = a.cdata();
  for (std::size_t i = 0; i < x.size(); ++i) n.re[i] = std::norm(x[i]);
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t i = 0; i < out.re.size(); ++i) in.grad_cx[i] += 2.0 * out.grad_re[i] * std::conj(in.cx[i]);
    };
  }
  return a.tape().record(std::move(n));
}

Value inner_product(const Value& a, const Value& w) {
  same_tape(a, w);
  require_complex(a, "inner_product");
  require_complex(w, "inner_product");
  require_rank(w, 2, "inner_product");
  const std::size_t M = w.shape()[0], N = w.shape()[1];
  std::size_t K = 1;
  Shape out_shape;
  if (a.shape().size() == 3 && a.shape()[1] == M && a.shape()[2] == N) {
    K = a.shape()[0];
    out_shape = {K, M};
  } else if (a.shape() == w.shape()) {
    out_shape = {M};
  } else {
    throw Error("autodiff: inner_product shape mismatch " + to_string(a.shape()) + " vs " + to_string(w.shape()));
  }
  Node n = make_node("inner_product", out_shape, true, {&a, &w});
  kernels::conj_inner_product(a.cdata().data(), w.cdata().data(), n.cx.data(), K, M, N);
  if (n.requires_grad) {
    n.backward = [K, M, N](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& an = t.node(out.inputs[0]);
      Node& wn = t.node(out.inputs[1]);
      if (wn.requires_grad) {
        // G_w[m][n] += sum_k G_y[k][m] conj(a[k][m][n])
        double* gw = reinterpret_cast<double*>(wn.grad_cx.data());
        const double* ad = reinterpret_cast<const double*>(an.cx.data());
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t m = 0; m < M; ++m) {
            const cplx g = out.grad_cx[k * M + m];
            const double gr = g.real(), gi = g.imag();
            const double* arow = ad + 2 * ((k * M + m) * N);
            double* grow = gw + 2 * (m * N);
            for (std::size_t i = 0; i < N; ++i) {
              const double ar = arow[2 * i], ai = arow[2 * i + 1];
              grow[2 * i] += gr * ar + gi * ai;
              grow[2 * i + 1] += gi * ar - gr * ai;
            }
          }
        }
      }
      if (an.requires_grad) {
        // G_a[k][m][n] += conj(G_y[k][m] w[m][n])
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t m = 0; m < M; ++m) {
            const cplx g = out.grad_cx[k * M + m];
            for (std::size_t i = 0; i < N; ++i) {
              an.grad_cx[(k * M + m) * N + i] += std::conj(g * wn.cx[m * N + i]);
            }
          }
        }
      }
    };
  }
  return a.tape().record(std::move(n));
}

// ---- Real unary maps --------------------------------------------------------

Value tanh(const Value& a) {
  return unary_real(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Value softplus(const Value& a) {
  return unary_real(
      a, "softplus", [](double x) { return kernels::softplus(x); },
      [](double x, double) { return kernels::sigmoid(x); });
}

Value relu(const Value& a) {
  return unary_real(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value cos(const Value& a) {
  return unary_real(
      a, "cos", [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Value sin(const Value& a) {
  return unary_real(
      a, "sin", [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Value sqrt(const Value& a) {
  return unary_real(
      a, "sqrt", [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Value square(const Value& a) {
  return unary_real(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Value to_dbm(const Value& a) {
  return unary_real(
      a, "to_dbm", [](double x) { return 10.0 * std::log10(x) + 30.0; },
      [](double x, double) { return 10.0 / (std::numbers::ln10 * x); });
}

Value mod_const(const Value& a, double period) {
  if (!(period > 0.0)) throw Error("autodiff: mod_const period must be positive");
  return unary_real(
      a, "mod_const", [period](double x) { return kernels::mod_positive(x, period); },
      [](double, double) { return 1.0; });
}

Value quantize_st(const Value& a, int bits, double lo, double hi) {
  if (!(hi > lo)) throw Error("autodiff: quantize_st needs lo < hi");
  return unary_real(
      a, "quantize_st", [=](double x) { return kernels::quantize_midrise(x, bits, lo, hi); },
      [](double, double) { return 1.0; });
}

Value straight_through(const Value& a, std::vector<double> forward) {
  require_real(a, "straight_through");
  if (forward.size() != a.size()) throw Error("autodiff: straight_through forward size does not match input");
  Node n = make_node("straight_through", a.shape(), false, {&a});
  n.re = std::move(forward);
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t i = 0; i < out.grad_re.size(); ++i) in.grad_re[i] += out.grad_re[i];
    };
  }
  return a.tape().record(std::move(n));
}

// ---- Row-wise maps ------------------------------------------------------------

Value softmax_scaled(const Value& a, double alpha) {
  require_real(a, "softmax_scaled");
  require_rank(a, 2, "softmax_scaled");
  const std::size_t K = a.shape()[0], M = a.shape()[1];
  Node n = make_node("softmax_scaled", a.shape(), false, {&a});
  const auto x = a.data();
  for (std::size_t k = 0; k < K; ++k) kernels::softmax_scaled_row(x.data() + k * M, M, alpha, n.re.data() + k * M);
  if (n.requires_grad) {
    n.backward = [K, M, alpha](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t k = 0; k < K; ++k) {
        const double* y = out.re.data() + k * M;
        const double* g = out.grad_re.data() + k * M;
        double dot = 0.0;
        for (std::size_t m = 0; m < M; ++m) dot += g[m] * y[m];
        for (std::size_t m = 0; m < M; ++m) in.grad_re[k * M + m] += alpha * y[m] * (g[m] - dot);
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value max_normalize_rows(const Value& a) {
  require_real(a, "max_normalize_rows");
  require_rank(a, 2, "max_normalize_rows");
  const std::size_t K = a.shape()[0], M = a.shape()[1];
  Node n = make_node("max_normalize_rows", a.shape(), false, {&a});
  const auto x = a.data();
  std::vector<std::size_t> args(K);
  for (std::size_t k = 0; k < K; ++k) args[k] = kernels::max_normalize_row(x.data() + k * M, M, n.re.data() + k * M);
  if (n.requires_grad) {
    n.backward = [K, M, args = std::move(args)](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t k = 0; k < K; ++k) {
        const double peak = in.re[k * M + args[k]];
        const double* g = out.grad_re.data() + k * M;
        const double* y = out.re.data() + k * M;
        double dot = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
          in.grad_re[k * M + m] += g[m] / peak;
          dot += g[m] * y[m];
        }
        in.grad_re[k * M + args[k]] -= dot / peak;
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value row_dot(const Value& a, std::span<const double> c) {
  require_real(a, "row_dot");
  require_rank(a, 2, "row_dot");
  const std::size_t K = a.shape()[0], M = a.shape()[1];
  if (c.size() != M) throw Error("autodiff: row_dot weight length mismatch");
  Node n = make_node("row_dot", {K}, false, {&a});
  const auto x = a.data();
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t m = 0; m < M; ++m) s += x[k * M + m] * c[m];
    n.re[k] = s;
  }
  if (n.requires_grad) {
    n.backward = [K, M, w = std::vector<double>(c.begin(), c.end())](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t m = 0; m < M; ++m) in.grad_re[k * M + m] += out.grad_re[k] * w[m];
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value row_sum(const Value& a) {
  require_real(a, "row_sum");
  require_rank(a, 2, "row_sum");
  const std::size_t K = a.shape()[0], M = a.shape()[1];
  Node n = make_node("row_sum", {K}, false, {&a});
  const auto x = a.data();
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t m = 0; m < M; ++m) s += x[k * M + m];
    n.re[k] = s;
  }
  if (n.requires_grad) {
    n.backward = [K, M](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t m = 0; m < M; ++m) in.grad_re[k * M + m] += out.grad_re[k];
      }
    };
  }
  return a.tape().record(std::move(n));
}

// ---- Linear algebra and shapes --------------------------------------------

Value matmul(const Value& a, const Value& b) {
  same_tape(a, b);
  require_real(a, "matmul");
  require_real(b, "matmul");
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t I = a.shape()[0], J = a.shape()[1], K = b.shape()[1];
  if (b.shape()[0] != J) throw Error("autodiff: matmul inner dimension mismatch");
  Node n = make_node("matmul", {I, K}, false, {&a, &b});
  kernels::matmul(a.data().data(), b.data().data(), n.re.data(), I, J, K);
  if (n.requires_grad) {
    n.backward = [I, J, K](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& an = t.node(out.inputs[0]);
      Node& bn = t.node(out.inputs[1]);
      if (an.requires_grad) kernels::matmul_grad_lhs(out.grad_re.data(), bn.re.data(), an.grad_re.data(), I, J, K);
      if (bn.requires_grad) kernels::matmul_grad_rhs(an.re.data(), out.grad_re.data(), bn.grad_re.data(), I, J, K);
    };
  }
  return a.tape().record(std::move(n));
}

Value bias_add(const Value& a, const Value& bias) {
  same_tape(a, bias);
  require_real(a, "bias_add");
  require_rank(a, 2, "bias_add");
  const std::size_t I = a.shape()[0], K = a.shape()[1];
  if (bias.size() != K) throw Error("autodiff: bias_add length mismatch");
  Node n = make_node("bias_add", a.shape(), false, {&a, &bias});
  const auto x = a.data();
  const auto b = bias.data();
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t k = 0; k < K; ++k) n.re[i * K + k] = x[i * K + k] + b[k];
  }
  if (n.requires_grad) {
    n.backward = [I, K](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& an = t.node(out.inputs[0]);
      Node& bn = t.node(out.inputs[1]);
      if (an.requires_grad) {
        for (std::size_t i = 0; i < I * K; ++i) an.grad_re[i] += out.grad_re[i];
      }
      if (bn.requires_grad) {
        for (std::size_t i = 0; i < I; ++i) {
          for (std::size_t k = 0; k < K; ++k) bn.grad_re[k] += out.grad_re[i * K + k];
        }
      }
    };
  }
  return a.tape().record(std::move(n));
}

Value sum(const Value& a) {
  require_real(a, "sum");
  Node n = make_node("sum", {1}, false, {&a});
  double s = 0.0;
  for (double v : a.data()) s += v;
  n.re[0] = s;
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (double& g : in.grad_re) g += out.grad_re[0];
    };
  }
  return a.tape().record(std::move(n));
}

Value mean(const Value& a) {
  require_real(a, "mean");
  const double inv = 1.0 / static_cast<double>(a.size());
  Node n = make_node("mean", {1}, false, {&a});
  double s = 0.0;
  for (double v : a.data()) s += v;
  n.re[0] = s * inv;
  if (n.requires_grad) {
    n.backward = [inv](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (double& g : in.grad_re) g += out.grad_re[0] * inv;
    };
  }
  return a.tape().record(std::move(n));
}

Value column(const Value& a, std::size_t j) {
  require_real(a, "column");
  require_rank(a, 2, "column");
  const std::size_t I = a.shape()[0], J = a.shape()[1];
  if (j >= J) throw Error("autodiff: column index out of range");
  Node n = make_node("column", {I}, false, {&a});
  const auto x = a.data();
  for (std::size_t i = 0; i < I; ++i) n.re[i] = x[i * J + j];
  if (n.requires_grad) {
    n.backward = [I, J, j](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t i = 0; i < I; ++i) in.grad_re[i * J + j] += out.grad_re[i];
    };
  }
  return a.tape().record(std::move(n));
}

Value stack_columns(std::span<const Value> cols) {
  if (cols.empty()) throw Error("autodiff: stack_columns needs at least one column");
  const std::size_t I = cols[0].size(), J = cols.size();
  Node n;
  n.op = "stack_columns";
  n.shape = {I, J};
  n.re.resize(I * J);
  for (std::size_t j = 0; j < J; ++j) {
    same_tape(cols[0], cols[j]);
    require_real(cols[j], "stack_columns");
    if (cols[j].size() != I) throw Error("autodiff: stack_columns length mismatch");
    n.inputs.push_back(cols[j].id());
    n.requires_grad = n.requires_grad || cols[j].requires_grad();
    const auto x = cols[j].data();
    for (std::size_t i = 0; i < I; ++i) n.re[i * J + j] = x[i];
  }
  if (n.requires_grad) {
    n.backward = [I, J](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      for (std::size_t j = 0; j < J; ++j) {
        Node& in = t.node(out.inputs[j]);
        if (!in.requires_grad) continue;
        for (std::size_t i = 0; i < I; ++i) in.grad_re[i] += out.grad_re[i * J + j];
      }
    };
  }
  return cols[0].tape().record(std::move(n));
}

Value concat_rows(std::span<const Value> blocks) {
  if (blocks.empty()) throw Error("autodiff: concat_rows needs at least one block");
  const bool complex = blocks[0].is_complex();
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    same_tape(blocks[0], b);
    require_rank(b, 2, "concat_rows");
    if (b.is_complex() != complex || b.shape()[1] != blocks[0].shape()[1]) {
      throw Error("autodiff: concat_rows block mismatch");
    }
    rows += b.shape()[0];
  }
  const std::size_t cols = blocks[0].shape()[1];
  Node n;
  n.op = "concat_rows";
  n.shape = {rows, cols};
  n.complex = complex;
  if (complex) {
    n.cx.reserve(rows * cols);
  } else {
    n.re.reserve(rows * cols);
  }
  for (const auto& b : blocks) {
    n.inputs.push_back(b.id());
    n.requires_grad = n.requires_grad || b.requires_grad();
    if (complex) {
      n.cx.insert(n.cx.end(), b.cdata().begin(), b.cdata().end());
    } else {
      n.re.insert(n.re.end(), b.data().begin(), b.data().end());
    }
  }
  if (n.requires_grad) {
    n.backward = [](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      std::size_t offset = 0;
      for (auto id : out.inputs) {
        Node& in = t.node(id);
        const std::size_t count = out.complex ? in.cx.size() : in.re.size();
        if (in.requires_grad) {
          for (std::size_t i = 0; i < count; ++i) {
            if (out.complex) {
              in.grad_cx[i] += out.grad_cx[offset + i];
            } else {
              in.grad_re[i] += out.grad_re[offset + i];
            }
          }
        }
        offset += count;
      }
    };
  }
  return blocks[0].tape().record(std::move(n));
}

Value tile_rows(const Value& v, std::size_t rows) {
  require_real(v, "tile_rows");
  require_rank(v, 1, "tile_rows");
  const std::size_t N = v.size();
  Node n = make_node("tile_rows", {rows, N}, false, {&v});
  const auto x = v.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(x.begin(), x.end(), n.re.begin() + r * N);
  if (n.requires_grad) {
    n.backward = [rows, N](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < N; ++i) in.grad_re[i] += out.grad_re[r * N + i];
      }
    };
  }
  return v.tape().record(std::move(n));
}

Value outer_const(std::span<const double> c, const Value& v) {
  require_real(v, "outer_const");
  require_rank(v, 1, "outer_const");
  const std::size_t M = c.size(), N = v.size();
  Node n = make_node("outer_const", {M, N}, false, {&v});
  const auto x = v.data();
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t i = 0; i < N; ++i) n.re[m * N + i] = c[m] * x[i];
  }
  if (n.requires_grad) {
    n.backward = [M, N, w = std::vector<double>(c.begin(), c.end())](Tape& t, std::size_t self) {
      const Node& out = t.node(self);
      Node& in = t.node(out.inputs[0]);
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t i = 0; i < N; ++i) in.grad_re[i] += w[m] * out.grad_re[m * N + i];
      }
    };
  }
  return v.tape().record(std::move(n));
}

}  // namespace ptaloc::ad
