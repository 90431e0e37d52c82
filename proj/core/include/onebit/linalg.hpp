#pragma once

#include <random>

#include "onebit/common.hpp"

namespace onebit {

/// Cholesky factor of a Hermitian PSD matrix with a small diagonal jitter.
///
/// Covariances in this library are factorized once per scene and reused for
/// every solve, whitening and sampling step that needs them.
class HermitianFactor {
 public:
  static constexpr double kDefaultJitter = 1e-12;

  explicit HermitianFactor(const CMatrix& a, double jitter = kDefaultJitter);

  Eigen::Index size() const { return lower_.rows(); }
  const CMatrix& lower() const { return lower_; }

  CVector solve(const CVector& b) const;
  CMatrix solve(const CMatrix& b) const;
  // L^{-1} b, i.e. whitening by the inverse square root.
  CMatrix whiten(const CMatrix& b) const;
  CVector whiten(const CVector& b) const;
  CMatrix inverse() const;

 private:
  CMatrix lower_;
};

bool is_hermitian(const CMatrix& a, double tol);
// Smallest eigenvalue of the Hermitian part.
double min_eigenvalue(const CMatrix& a);

// [Re H, -Im H; Im H, Re H], so that y^H H y = x^T E x with x = [Re y; Im y].
RMatrix real_embedding(const CMatrix& h);
RVector stack_real(const CVector& y);
CVector unstack_real(const RVector& x);

// Circularly-symmetric standard complex normal draws, E|z|^2 = 1.
CVector standard_complex_normal(Eigen::Index n, std::mt19937_64& rng);

}  // namespace onebit
