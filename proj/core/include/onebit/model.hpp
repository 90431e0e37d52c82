#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "onebit/common.hpp"

namespace onebit {

enum class SequenceKind { RandomPhase, QuadraticPhase };

/// Complex probing code of length N with energy N.
class TransmitSequence {
 public:
  TransmitSequence() = default;

  // Rescales to energy N; throws on an empty or all-zero input.
  static TransmitSequence from_samples(CVector samples);

  const CVector& samples() const { return samples_; }
  Eigen::Index length() const { return samples_.size(); }

 private:
  explicit TransmitSequence(CVector s) : samples_(std::move(s)) {}
  CVector samples_;
};

TransmitSequence generate_unimodular_sequence(Eigen::Index n, SequenceKind kind, std::uint64_t seed);

// J_k s for k >= 0 (delay, k leading zeros) and J_{-k}^H s = J_k^H s for k < 0
// (advance, |k| trailing zeros).
CVector shift_apply(const CVector& s, int k);

// Shift order of the columns of the delay-spread matrix: 0, 1, ..., N-1, -(N-1), ..., -1.
std::vector<int> delay_shift_indices(Eigen::Index n);
// N x (2N-1) matrix whose columns are the delayed/advanced copies of s.
CMatrix delay_spread_matrix(const CVector& s);

// p(nu) with entries exp(j 2 pi n nu), n = 0..N-1.
CVector steering_vector(double nu, Eigen::Index n);

// Wraps into the principal interval [-0.5, 0.5).
double wrap_doppler(double nu);

struct StationaryInterferenceModel {
  double beta = 0.0;  // average clutter power per range cell
  CMatrix gamma;      // noise covariance

  void validate(Eigen::Index n) const;
};

/// Range-ring / azimuth-sector clutter with uniform Doppler spread per cell.
struct MovingClutterModel {
  int rings = 0;    // Nc
  int sectors = 0;  // L
  RMatrix sigmaSq;  // rings x sectors, per-cell scattering power
  RMatrix nuBar;    // rings x sectors, Doppler centers
  RMatrix epsD;     // rings x sectors, Doppler spread widths
  CMatrix gamma;    // noise covariance

  // Every cell gets the same power and the same Doppler interval.
  static MovingClutterModel uniform(int rings, int sectors, double cellPower, double nuCenter,
                                    double nuWidth, CMatrix gamma);

  void validate(Eigen::Index n) const;
};

// R = beta * sum_{0<|k|<=N-1} J_k s s^H J_k^H + Gamma
CMatrix stationary_covariance(const TransmitSequence& s, const StationaryInterferenceModel& m);

// E{p(nu) p(nu)^H} for nu uniform on (nuBar - epsD/2, nuBar + epsD/2):
// exp(j 2 pi (a-b) nuBar) * sinc(pi (a-b) epsD).
CMatrix doppler_covariance(Eigen::Index n, double nuBar, double epsD);
// E{p(nu)} for the same uniform prior.
CVector doppler_mean(Eigen::Index n, double nuBar, double epsD);

// Sigma_c = sum_k sum_l sigma^2_(k,l) J_k Diag(s) C_nu(k,l) Diag(s)^H J_k^H
CMatrix moving_clutter_covariance(const TransmitSequence& s, const MovingClutterModel& m);

CMatrix total_covariance_moving(const CMatrix& clutterCov, const CMatrix& gamma);

struct SceneRealization {
  Complex alpha0;
  double nu = 0.0;
  CVector clutterCoeffs;   // stationary: shifts 1..N-1, -(N-1)..-1; moving: row-major (k,l)
  RVector clutterDoppler;  // moving only, per cell
  CVector noise;
  CVector y;
};

/// Draws zero-mean complex Gaussian vectors with a fixed covariance.
class ComplexGaussianSampler {
 public:
  // Throws InvalidArgument when cov is not Hermitian PSD (eigenvalue < -1e-10).
  explicit ComplexGaussianSampler(const CMatrix& cov);
  CVector draw(std::mt19937_64& rng) const;
  const CMatrix& factor() const { return lower_; }

 private:
  CMatrix lower_;
};

SceneRealization synthesize_stationary_scene(const TransmitSequence& s, Complex alpha0,
                                             const StationaryInterferenceModel& m,
                                             std::mt19937_64& rng);
SceneRealization synthesize_stationary_scene(const TransmitSequence& s, Complex alpha0,
                                             const StationaryInterferenceModel& m, std::uint64_t seed);

SceneRealization synthesize_moving_scene(const TransmitSequence& s, Complex alpha0, double nu,
                                         const MovingClutterModel& m, std::mt19937_64& rng);
SceneRealization synthesize_moving_scene(const TransmitSequence& s, Complex alpha0, double nu,
                                         const MovingClutterModel& m, std::uint64_t seed);

// Re-evaluates the signal model from a realization's own fields.
CVector assemble_stationary(const TransmitSequence& s, const SceneRealization& r);
CVector assemble_moving(const TransmitSequence& s, const MovingClutterModel& m, const SceneRealization& r);

}  // namespace onebit
