#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "onebit/common.hpp"

namespace onebit {

enum class BankKind { Single, Parallel, PBit };

/// Comparator thresholds applied at the receiver.
///
/// Single/Parallel banks hold K complex threshold vectors, one per one-bit
/// comparator pair (real and imaginary channel). A p-bit bank holds the
/// 2^p - 1 finite levels of each sample's quantizer for both channels; the
/// outer levels -inf and +inf are implicit.
struct ThresholdBank {
  BankKind kind = BankKind::Single;
  std::vector<CVector> vectors;
  int bits = 0;
  RMatrix realLevels;  // N x (2^p - 1), strictly increasing along each row
  RMatrix imagLevels;

  static ThresholdBank single(CVector lambda);
  static ThresholdBank parallel(std::vector<CVector> lambdas);
  static ThresholdBank p_bit(int bits, RMatrix realLevels, RMatrix imagLevels);

  Eigen::Index length() const;
  // Mean over comparators; for p-bit banks, the per-sample mean of the finite levels.
  CVector mean_threshold() const;
  void validate() const;
};

/// Sign bits (or p-bit bucket indices) together with the thresholds used.
struct QuantizedObservation {
  ThresholdBank thresholds;
  std::vector<IVector> gammaR;  // one +-1 vector per comparator
  std::vector<IVector> gammaI;
  IVector bucketR;  // p-bit only: k with level_k <= value < level_{k+1}
  IVector bucketI;

  Eigen::Index length() const;
  std::size_t comparators() const { return gammaR.size(); }
  bool is_p_bit() const { return thresholds.kind == BankKind::PBit; }

  // (gamma_r + j gamma_i) / sqrt(2) for comparator k.
  CVector gamma(std::size_t k = 0) const;
  Eigen::DiagonalMatrix<double, Eigen::Dynamic> omega_r(std::size_t k = 0) const;
  Eigen::DiagonalMatrix<double, Eigen::Dynamic> omega_i(std::size_t k = 0) const;
};

// sgn with sgn(0) = +1.
inline int sign_bit(double v) { return v >= 0.0 ? 1 : -1; }

QuantizedObservation quantize_one_bit(const CVector& y, const CVector& lambda);
QuantizedObservation quantize_parallel(const CVector& y, const std::vector<CVector>& lambdas);
QuantizedObservation quantize_p_bit(const CVector& y, const ThresholdBank& bank);
QuantizedObservation quantize(const CVector& y, const ThresholdBank& bank);

// Bucket of value among sorted finite levels: closed below, open above.
int bucket_index(double value, const double* levels, int count);

/// Prior over the target backscattering coefficient used for threshold design.
struct AlphaPrior {
  Complex mean{0.0, 0.0};
  double power = 0.0;  // weight of the signature outer product in Cov(lambda)
};

/// Prior over the target Doppler: a point (tracking) or a uniform interval.
struct DopplerPrior {
  enum class Kind { Point, Uniform };
  Kind kind = Kind::Point;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  static DopplerPrior point(double nu);
  static DopplerPrior uniform(double lo, double hi);

  CVector mean_steering(Eigen::Index n) const;    // E{p(nu)}
  CMatrix steering_moment(Eigen::Index n) const;  // E{p(nu) p(nu)^H}
};

// lambda = E{alpha0} s.
CVector design_threshold_mean(const CVector& s, Complex alphaPrior);

// Mean and covariance of the received vector under the priors:
// E{alpha0} (s . E{p}) and power (s s^H) . E{p p^H} + R.
struct PredictedSignal {
  CVector mean;
  CMatrix covariance;
};
PredictedSignal predict_signal(const CVector& s, const AlphaPrior& alpha, const CMatrix& r,
                               const std::optional<DopplerPrior>& nu);

// K Gaussian threshold vectors drawn from the predicted distribution of y.
std::vector<CVector> design_threshold_random(const CVector& s, const AlphaPrior& alpha, const CMatrix& r, int k,
                                             const std::optional<DopplerPrior>& nu, std::mt19937_64& rng);
std::vector<CVector> design_threshold_random(const CVector& s, const AlphaPrior& alpha, const CMatrix& r, int k,
                                             const std::optional<DopplerPrior>& nu, std::uint64_t seed);

// 2^p - 1 levels per sample and channel, evenly spaced over mean +- 3 std of
// the predicted distribution.
ThresholdBank default_p_bit_levels(int bits, const PredictedSignal& predicted);

}  // namespace onebit
