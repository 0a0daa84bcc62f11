#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "ptaloc/autodiff.hpp"
#include "ptaloc/error.hpp"

using namespace ptaloc;
using ad::cplx;

namespace {

using Build = std::function<ad::Value(ad::Tape&, const std::vector<ad::Value>&)>;

// Reduces any output to a real scalar with fixed random weights so every
// output element contributes a distinct amount to the loss.
ad::Value reduce(ad::Tape& t, const ad::Value& y) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if (y.is_complex()) {
    std::vector<cplx> c(y.size());
    for (auto& v : c) v = {u(rng), u(rng)};
    return ad::sum(ad::abs_squared(ad::add(y, t.constant(y.shape(), std::move(c)))));
  }
  std::vector<double> c(y.size());
  for (auto& v : c) v = u(rng);
  return ad::sum(ad::mul(y, t.constant(y.shape(), std::move(c))));
}

double max_rel_error(const Build& build, std::vector<ad::Shape> shapes, std::vector<std::vector<double>> values,
                     double eps = 1e-3) {
  auto eval = [&](std::vector<std::vector<double>>* grads) {
    ad::Tape t;
    std::vector<ad::Value> leaves;
    for (std::size_t i = 0; i < shapes.size(); ++i) leaves.push_back(t.parameter(shapes[i], values[i]));
    const auto loss = reduce(t, build(t, leaves));
    if (grads) {
      t.backward(loss);
      grads->clear();
      for (const auto& l : leaves) grads->emplace_back(l.grad().begin(), l.grad().end());
    }
    return loss.item();
  };
  std::vector<std::vector<double>> grads;
  eval(&grads);
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < values[i].size(); ++j) {
      const double keep = values[i][j];
      // Five-point stencil: truncation error O(eps^4), so the step can be
      // large enough that roundoff in the loss does not swamp small gradients.
      auto at = [&](double offset) {
        values[i][j] = keep + offset;
        return eval(nullptr);
      };
      const double num = (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
      values[i][j] = keep;
      const double denom = std::max({std::abs(num), std::abs(grads[i][j]), 1e-6});
      worst = std::max(worst, std::abs(num - grads[i][j]) / denom);
    }
  }
  return worst;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("elementwise real ops match central differences") {
  const std::vector<ad::Shape> two = {{3, 4}, {3, 4}};
  const std::vector<std::vector<double>> ab = {random_vec(12, 1), random_vec(12, 2)};
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::add(v[0], v[1]); }, two, ab) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::sub(v[0], v[1]); }, two, ab) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::mul(v[0], v[1]); }, two, ab) < 1e-6);
  const std::vector<ad::Shape> one = {{3, 4}};
  const std::vector<std::vector<double>> a = {random_vec(12, 3)};
  const std::vector<std::vector<double>> pos = {random_vec(12, 4, 0.2, 3.0)};
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::scale(v[0], -2.5); }, one, a) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::affine(v[0], 1.5, 0.25); }, one, a) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::tanh(v[0]); }, one, a) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::softplus(v[0]); }, one, a) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::relu(v[0]); }, one, a) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::cos(v[0]); }, one, a) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::sin(v[0]); }, one, a) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::square(v[0]); }, one, a) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::sqrt(v[0]); }, one, pos) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::to_dbm(v[0]); }, one, pos) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::mean(v[0]); }, one, a) < 1e-6);
  const std::vector<double> f = random_vec(12, 5);
  CHECK(max_rel_error([&](ad::Tape&, const std::vector<ad::Value>& v) { return ad::mul_const(v[0], f); }, one, a) < 1e-6);
}

TEST_CASE("complex ops match central differences") {
  const std::vector<ad::Shape> one = {{2, 5}};
  const std::vector<std::vector<double>> a = {random_vec(10, 6, -3.0, 3.0)};
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::expj(v[0]); }, one, a) < 1e-6);
  auto cx = [](ad::Tape& t, const ad::Value& x) {
    std::vector<cplx> c(x.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = {0.3 + 0.1 * i, -0.2 * i};
    return ad::mul(ad::expj(x), t.constant(x.shape(), std::move(c)));
  };
  CHECK(max_rel_error([&](ad::Tape& t, const std::vector<ad::Value>& v) { return ad::conj(cx(t, v[0])); }, one, a) < 1e-6);
  CHECK(max_rel_error([&](ad::Tape& t, const std::vector<ad::Value>& v) { return ad::complex_exp(cx(t, v[0])); }, one, a) < 1e-6);
  CHECK(max_rel_error([&](ad::Tape& t, const std::vector<ad::Value>& v) { return ad::abs_squared(cx(t, v[0])); }, one, a) < 1e-6);

  // inner_product with a trainable weight matrix and a constant channel.
  const std::vector<ad::Shape> mn = {{3, 4}};
  const std::vector<std::vector<double>> ph = {random_vec(12, 7, -3.0, 3.0)};
  auto ip = [](ad::Tape& t, const std::vector<ad::Value>& v) {
    std::vector<cplx> h(2 * 3 * 4);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::polar(1.0 + 0.1 * i, 0.37 * i);
    const auto hv = t.constant({2, 3, 4}, std::move(h));
    return ad::inner_product(hv, ad::expj(v[0]));
  };
  CHECK(max_rel_error(ip, mn, ph) < 1e-6);
}

TEST_CASE("row-wise ops match central differences") {
  const std::vector<ad::Shape> km = {{3, 6}};
  const std::vector<std::vector<double>> p = {random_vec(18, 8, 0.1, 1.0)};
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::softmax_scaled(v[0], 20.0); }, km, p) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::max_normalize_rows(v[0]); }, km, p) < 1e-6);
  const std::vector<double> ramp = {1, 2, 3, 4, 5, 6};
  CHECK(max_rel_error([&](ad::Tape&, const std::vector<ad::Value>& v) { return ad::row_dot(v[0], ramp); }, km, p) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::row_sum(v[0]); }, km, p) < 1e-6);
  CHECK(max_rel_error([](ad::Tape&, const std::vector<ad::Value>& v) { return ad::column(v[0], 4); }, km, p) < 1e-6);
  auto chain = [](ad::Tape&, const std::vector<ad::Value>& v) {
    const auto w = ad::softmax_scaled(ad::max_normalize_rows(v[0]), 20.0);
    return ad::to_dbm(ad::row_sum(ad::mul(w, v[0])));
  };
  CHECK(max_rel_error(chain, km, p) < 1e-6);
}

TEST_CASE("linear algebra and shape ops match central differences") {
  const std::vector<ad::Shape> ab = {{3, 4}, {4, 2}};
  const std::vector<std::vector<double>> v = {random_vec(12, 9), random_vec(8, 10)};
  CHECK(max_rel_error([](ad::Tape&, const auto& x) { return ad::matmul(x[0], x[1]); }, ab, v) < 1e-6);
  const std::vector<ad::Shape> xb = {{3, 4}, {4}};
  const std::vector<std::vector<double>> w = {random_vec(12, 11), random_vec(4, 12)};
  CHECK(max_rel_error([](ad::Tape&, const auto& x) { return ad::bias_add(x[0], x[1]); }, xb, w) < 1e-6);
  const std::vector<ad::Shape> cols = {{5}, {5}};
  const std::vector<std::vector<double>> c = {random_vec(5, 13), random_vec(5, 14)};
  CHECK(max_rel_error([](ad::Tape&, const auto& x) { return ad::stack_columns(x); }, cols, c) < 1e-6);
  const std::vector<ad::Shape> rows = {{2, 3}, {1, 3}};
  const std::vector<std::vector<double>> r = {random_vec(6, 15), random_vec(3, 16)};
  CHECK(max_rel_error([](ad::Tape&, const auto& x) { return ad::concat_rows(x); }, rows, r) < 1e-6);
  const std::vector<ad::Shape> vec = {{4}};
  const std::vector<std::vector<double>> t = {random_vec(4, 17)};
  CHECK(max_rel_error([](ad::Tape&, const auto& x) { return ad::tile_rows(x[0], 3); }, vec, t) < 1e-6);
  const std::vector<double> coef = {0.5, -1.0, 2.0};
  CHECK(max_rel_error([&](ad::Tape&, const auto& x) { return ad::outer_const(coef, x[0]); }, vec, t) < 1e-6);
}

TEST_CASE("projection and quantizer ops pass gradients straight through") {
  ad::Tape t;
  const auto a = t.parameter({3}, std::vector<double>{7.0, -1.0, 2.5});
  const auto m = ad::mod_const(a, 2.0);
  CHECK(m.data()[0] == doctest::Approx(1.0));
  CHECK(m.data()[1] == doctest::Approx(1.0));
  CHECK(m.data()[2] == doctest::Approx(0.5));
  const auto q = ad::quantize_st(a, 2, 0.0, 8.0);
  CHECK(q.data()[0] == doctest::Approx(7.0));
  CHECK(q.data()[1] == doctest::Approx(1.0));
  const auto s = ad::straight_through(a, {10.0, 20.0, 30.0});
  CHECK(s.data()[2] == 30.0);
  t.backward(ad::sum(ad::add(ad::add(m, q), ad::scale(s, 2.0))));
  for (double g : a.grad()) CHECK(g == doctest::Approx(4.0));
  CHECK_THROWS_AS(ad::straight_through(a, {1.0}), Error);
}

TEST_CASE("tape rejects misuse") {
  ad::Tape t;
  const auto a = t.parameter({2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK_THROWS_AS(t.backward(a), Error);
  CHECK_THROWS_AS(t.constant({3}, std::vector<double>{1.0}), Error);
  const auto b = t.parameter({3}, std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(ad::add(a, b), Error);
  ad::Tape other;
  const auto c = other.scalar(1.0);
  CHECK_THROWS_AS(t.backward(c), Error);
}

TEST_CASE("gradients accumulate over shared subexpressions") {
  ad::Tape t;
  const auto x = t.parameter({1}, std::vector<double>{3.0});
  const auto y = ad::mul(x, x);
  const auto z = ad::add(y, ad::scale(x, 2.0));
  t.backward(ad::sum(z));
  CHECK(x.grad()[0] == doctest::Approx(8.0));
}
