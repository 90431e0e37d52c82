#include "onebit/linalg.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace onebit {

HermitianFactor::HermitianFactor(const CMatrix& a, double jitter) {
  require(a.rows() == a.cols(), "HermitianFactor: matrix must be square");
  require(a.rows() > 0, "HermitianFactor: empty matrix");
  CMatrix shifted = 0.5 * (a + a.adjoint());
  shifted.diagonal().array() += jitter;
  Eigen::LLT<CMatrix> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization failed (matrix not positive definite after jitter)");
  }
  lower_ = llt.matrixL();
}

CVector HermitianFactor::solve(const CVector& b) const {
  CVector z = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.adjoint().triangularView<Eigen::Upper>().solve(z);
}

CMatrix HermitianFactor::solve(const CMatrix& b) const {
  CMatrix z = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.adjoint().triangularView<Eigen::Upper>().solve(z);
}

CMatrix HermitianFactor::whiten(const CMatrix& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

CVector HermitianFactor::whiten(const CVector& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

CMatrix HermitianFactor::inverse() const {
  CMatrix inv = solve(CMatrix(CMatrix::Identity(size(), size())));
  return 0.5 * (inv + inv.adjoint());
}

bool is_hermitian(const CMatrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

RMatrix real_embedding(const CMatrix& h) {
  const Eigen::Index n = h.rows();
  RMatrix e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = h.real();
  e.topRightCorner(n, n) = -h.imag();
  e.bottomLeftCorner(n, n) = h.imag();
  e.bottomRightCorner(n, n) = h.real();
  return e;
}

RVector stack_real(const CVector& y) {
  RVector x(2 * y.size());
  x.head(y.size()) = y.real();
  x.tail(y.size()) = y.imag();
  return x;
}

CVector unstack_real(const RVector& x) {
  require(x.size() % 2 == 0, "unstack_real: odd length");
  const Eigen::Index n = x.size() / 2;
  CVector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = Complex(x(i), x(n + i));
  return y;
}

CVector standard_complex_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CVector z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    z(i) = Complex(re, im);
  }
  return z;
}

}  // namespace onebit
