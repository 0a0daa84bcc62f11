#pragma once

// Scalar and array kernels shared by the taped (autodiff) and plain code
// paths. Both paths must call these so their results agree bit-for-bit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>

namespace ptaloc::kernels {

using cplx = std::complex<double>;

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// x mod period, result in [0, period).
inline double mod_positive(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;
  return r;
}

/// 2 pi frac(f t): the phase of a delay t at frequency f, reduced to one
/// cycle before scaling. The rounding error of the product is recovered
/// with fma, so the result stays accurate to ~1e-16 rad even when f t runs
/// to hundreds of thousands of cycles.
inline double cycle_phase(double f, double t) {
  const double p = f * t;
  const double err = std::fma(f, t, -p);
  return 2.0 * std::numbers::pi * ((p - std::nearbyint(p)) + err);
}

/// Uniform mid-rise quantizer over [lo, hi] with 2^bits cells; returns the
/// midpoint of the cell containing x, clamping to the edge cells.
inline double quantize_midrise(double x, int bits, double lo, double hi) {
  const double cells = std::ldexp(1.0, bits);
  const double width = (hi - lo) / cells;
  double idx = std::floor((x - lo) / width);
  idx = std::clamp(idx, 0.0, cells - 1.0);
  return lo + (idx + 0.5) * width;
}

/// out[m] = exp(alpha (p[m] - max p)) / sum.
inline void softmax_scaled_row(const double* p, std::size_t n, double alpha, double* out) {
  double mx = p[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, p[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(alpha * (p[i] - mx));
    sum += out[i];
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
}

/// out = p / max(p); returns the index of the (first) maximum.
inline std::size_t max_normalize_row(const double* p, std::size_t n, double* out) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (p[i] > p[arg]) arg = i;
  }
  const double inv = 1.0 / p[arg];
  for (std::size_t i = 0; i < n; ++i) out[i] = p[i] * inv;
  return arg;
}

/// y[k][m] = sum_n conj(a[k][m][n]) * w[m][n]. Written on re/im pairs so the
/// compiler does not route through the NaN-checking complex multiply.
inline void conj_inner_product(const cplx* a, const cplx* w, cplx* y, std::size_t K, std::size_t M,
                               std::size_t N) {
  const double* ad = reinterpret_cast<const double*>(a);
  const double* wd = reinterpret_cast<const double*>(w);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      const double* arow = ad + 2 * ((k * M + m) * N);
      const double* wrow = wd + 2 * (m * N);
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double ar = arow[2 * n], ai = arow[2 * n + 1];
        const double wr = wrow[2 * n], wi = wrow[2 * n + 1];
        re += ar * wr + ai * wi;
        im += ar * wi - ai * wr;
      }
      y[k * M + m] = cplx(re, im);
    }
  }
}

/// C (I x K) = A (I x J) * B (J x K), all row-major.
void matmul(const double* a, const double* b, double* c, std::size_t I, std::size_t J, std::size_t K);

/// dA (I x J) += G (I x K) * B^T with B (J x K).
void matmul_grad_lhs(const double* g, const double* b, double* da, std::size_t I, std::size_t J, std::size_t K);

/// dB (J x K) += A^T * G with A (I x J), G (I x K).
void matmul_grad_rhs(const double* a, const double* g, double* db, std::size_t I, std::size_t J, std::size_t K);

}  // namespace ptaloc::kernels
