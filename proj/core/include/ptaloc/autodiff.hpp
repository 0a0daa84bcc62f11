#pragma once

// Array-level reverse-mode automatic differentiation.
//
// Complex gradients are stored as G = dL/dx - j dL/dy = 2 dL/dz for a real
// loss L and z = x + jy. With this convention a holomorphic f gives
// G_in = G_out * f'(z), conj maps G to conj(G), and a real input r feeding
// a complex node receives Re(G * dz/dr).

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ptaloc::ad {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Value {
 public:
  Value() = default;

  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }

  const Shape& shape() const;
  std::size_t size() const;
  bool is_complex() const;
  bool requires_grad() const;

  std::span<const double> data() const;
  std::span<const cplx> cdata() const;
  /// The single element of a real scalar node.
  double item() const;

  std::span<const double> grad() const;
  std::span<const cplx> cgrad() const;

 private:
  friend class Tape;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only operation record. One tape per forward/backward step.
class Tape {
 public:
  struct Node {
    const char* op = "leaf";
    Shape shape;
    bool complex = false;
    bool requires_grad = false;
    std::vector<double> re;
    std::vector<cplx> cx;
    std::vector<double> grad_re;
    std::vector<cplx> grad_cx;
    std::vector<std::size_t> inputs;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value constant(Shape shape, std::vector<double> data);
  Value constant(Shape shape, std::vector<cplx> data);
  Value scalar(double v) { return constant({1}, std::vector<double>{v}); }
  /// Real leaf whose gradient is filled by backward().
  Value parameter(Shape shape, std::vector<double> data);

  /// Reverse sweep from a real scalar loss. Every node that requires a
  /// gradient ends up with one (zeros when unreachable from the loss).
  void backward(const Value& loss);

  std::size_t size() const { return nodes_.size(); }
  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }

  /// Appends a node produced by a primitive. Inputs must already be on the tape.
  Value record(Node node);

 private:
  std::vector<Node> nodes_;
};

// Elementwise arithmetic. Operands share dtype; shapes match or one is a scalar.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double c);
/// a * c + shift, real only.
Value affine(const Value& a, double c, double shift);
/// Elementwise product with constant real factors of the same size.
Value mul_const(const Value& a, std::span<const double> factors);

// Complex.
/// exp(j a) for real a.
Value expj(const Value& a);
Value complex_exp(const Value& a);
Value conj(const Value& a);
/// |a|^2, complex in, real out.
Value abs_squared(const Value& a);
/// y[k][m] = sum_n conj(a[k][m][n]) w[m][n]; a is (K,M,N) or (M,N), w is (M,N).
Value inner_product(const Value& a, const Value& w);

// Real unary maps.
Value tanh(const Value& a);
Value softplus(const Value& a);
Value relu(const Value& a);
Value cos(const Value& a);
Value sin(const Value& a);
Value sqrt(const Value& a);
Value square(const Value& a);
/// 10 log10(a) + 30, watts to dBm.
Value to_dbm(const Value& a);
/// Forward a mod period in [0, period); backward passes gradients straight through.
Value mod_const(const Value& a, double period);
/// Forward mid-rise quantizer; backward straight through.
Value quantize_st(const Value& a, int bits, double lo, double hi);
/// Forward `forward` (same size as a); backward passes the gradient to a unchanged.
Value straight_through(const Value& a, std::vector<double> forward);

// Row-wise maps over (K, M).
Value softmax_scaled(const Value& a, double alpha);
Value max_normalize_rows(const Value& a);
/// out[k] = sum_m a[k][m] c[m].
Value row_dot(const Value& a, std::span<const double> c);
Value row_sum(const Value& a);

// Linear algebra and shape plumbing.
Value matmul(const Value& a, const Value& b);
Value bias_add(const Value& a, const Value& bias);
Value sum(const Value& a);
Value mean(const Value& a);
Value column(const Value& a, std::size_t j);
Value stack_columns(std::span<const Value> cols);
/// Concatenates rank-2 blocks (k_i, M) of one dtype into (sum k_i, M).
Value concat_rows(std::span<const Value> blocks);
/// (N) -> (rows, N).
Value tile_rows(const Value& v, std::size_t rows);
/// out[m][n] = c[m] * v[n].
Value outer_const(std::span<const double> c, const Value& v);

}  // namespace ptaloc::ad
