#include "ptaloc/kernels.hpp"

#include <Eigen/Dense>

namespace ptaloc::kernels {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }
}  // namespace

void matmul(const double* a, const double* b, double* c, std::size_t I, std::size_t J, std::size_t K) {
  ConstMap A(a, idx(I), idx(J));
  ConstMap B(b, idx(J), idx(K));
  MutMap C(c, idx(I), idx(K));
  C.noalias() = A * B;
}

void matmul_grad_lhs(const double* g, const double* b, double* da, std::size_t I, std::size_t J, std::size_t K) {
  ConstMap G(g, idx(I), idx(K));
  ConstMap B(b, idx(J), idx(K));
  MutMap dA(da, idx(I), idx(J));
  dA.noalias() += G * B.transpose();
}

void matmul_grad_rhs(const double* a, const double* g, double* db, std::size_t I, std::size_t J, std::size_t K) {
  ConstMap A(a, idx(I), idx(J));
  ConstMap G(g, idx(I), idx(K));
  MutMap dB(db, idx(J), idx(K));
  dB.noalias() += A.transpose() * G;
}

}  // namespace ptaloc::kernels
