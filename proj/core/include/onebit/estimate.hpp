#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "onebit/common.hpp"
#include "onebit/linalg.hpp"
#include "onebit/model.hpp"
#include "onebit/qpsolve.hpp"
#include "onebit/sampling.hpp"

namespace onebit {

enum class EstimateMethod { Proposed, Bussgang, FullPrecision };

std::string to_string(EstimateMethod m);
EstimateMethod estimate_method_from_string(const std::string& name);

struct ReceiveFilter {
  CVector w;
};

// w = R^{-1} s~, left unnormalized.
ReceiveFilter mmf_filter(const CVector& signature, const HermitianFactor& r);
ReceiveFilter mmf_filter(const CVector& signature, const CMatrix& r);

// alpha = w^H y / w^H s~
Complex mmf_estimate_alpha(const CVector& w, const CVector& y, const CVector& signature);

// (y - alpha s~)^H R^{-1} (y - alpha s~) with s~ = s . p(nu).
double wls_objective(const CVector& y, Complex alpha, double nu, const CVector& s, const HermitianFactor& r);
double wls_objective(const CVector& y, Complex alpha, double nu, const CVector& s, const CMatrix& r);

struct TargetEstimate {
  Complex alphaHat{0.0, 0.0};
  double nuHat = 0.0;
  CVector yHat;
  double objective = 0.0;
  int cycles = 0;
  EstimateMethod method = EstimateMethod::Proposed;
  // "ok" for closed-form and grid estimators; the QP status for the proposed
  // estimator; "maxCycles" when the cyclic loop hit its cap.
  std::string solverStatus = "ok";
  double kktResidual = 0.0;
  int iterations = 0;
  std::vector<double> objectiveHistory;  // per cycle (moving) or per solver step (stationary)
};

struct StationaryOptions {
  SolverOptions solver;
  RecoveryOptions recovery;
};

TargetEstimate estimate_stationary(const CVector& s, const HermitianFactor& r, const QuantizedObservation& obs,
                                   const StationaryOptions& options = {});
TargetEstimate estimate_stationary(const TransmitSequence& s, const StationaryInterferenceModel& m,
                                   const QuantizedObservation& obs, const StationaryOptions& options = {});

struct DopplerSearchOptions {
  int gridPoints = 1024;  // doubled automatically while below 2N
  double refineWidth = 1e-6;
};

// MMF on unquantized samples. With nu set, the signature is s . p(nu);
// without it, a stationary target is assumed unless searchDoppler is true,
// in which case nu is estimated by minimizing g first.
TargetEstimate estimate_full_precision(const CVector& s, const HermitianFactor& r, const CVector& y,
                                       std::optional<double> nu = std::nullopt, bool searchDoppler = false,
                                       const DopplerSearchOptions& search = {});

/// g(nu) = 2 Re{ -[(alpha s)^T . (y^H R^{-1})] p(nu) } + |alpha|^2 p(nu)^H [R^{-1} . (s s^H)^*] p(nu),
/// evaluated with alpha from the MMF at nu. The filter defaults to R^{-1} (s . p(nu));
/// a fixed filter may be passed instead.
double doppler_objective_g(double nu, const CVector& y, const CVector& s, const HermitianFactor& r,
                           const std::optional<CVector>& w = std::nullopt);

/// Fast evaluation of the concentrated Doppler objective
///     g*(nu) = -|s~^H R^{-1} y|^2 / (s~^H R^{-1} s~),   s~ = s . p(nu),
/// which equals g(nu) when the filter is re-derived at nu. The denominator is a
/// trigonometric polynomial fixed per scene; the numerator is refreshed per y.
class DopplerSpectrum {
 public:
  DopplerSpectrum(const CVector& s, const HermitianFactor& r);

  void set_observation(const CVector& y);
  double value(double nu) const;
  // Grid search over [-0.5, 0.5) followed by golden-section refinement.
  double argmin(const DopplerSearchOptions& options = {}) const;

 private:
  const HermitianFactor* r_;
  CVector s_;
  CVector lagCoeffs_;  // c_d for d = 0..N-1
  CVector weighted_;   // conj(s) . R^{-1} y
};

struct MovingOptions {
  SolverOptions solver;
  RecoveryOptions recovery;
  DopplerSearchOptions search;
  int maxCycles = 100;
  double tol = 1e-6;  // relative objective decrease
  // Starting Doppler. When unset it comes from a Doppler search on a proxy
  // built from the thresholds and the sign bits.
  std::optional<double> initialNu;
  double alphaPriorPower = 0.0;  // sets the proxy amplitude together with tr(R)/N
  // After each Doppler update, try 2x, 4x, ... the step (up to maxExtrapolation)
  // with a fresh recovery; accepted only when the cycle objective decreases.
  bool extrapolate = true;
  double maxExtrapolation = 64.0;
};

TargetEstimate estimate_moving(const CVector& s, const HermitianFactor& r, const QuantizedObservation& obs,
                               const MovingOptions& options = {});
TargetEstimate estimate_moving(const TransmitSequence& s, const MovingClutterModel& m,
                               const QuantizedObservation& obs, const MovingOptions& options = {});

// ---------------------------------------------------------------------------
// Bussgang-aided baseline

// (2/pi) asin(rho): correlation of the signs of two unit-variance jointly
// Gaussian variables with correlation rho.
double arcsine_law(double rho);

// sin(pi/2 Re X) + j sin(pi/2 Im X), entrywise.
CMatrix arcsine_map(const CMatrix& x);

// D^{-1/2} X D^{-1/2}, D = Diag(X). Nonpositive diagonal entries get a 1e-12 jitter.
CMatrix normalize_covariance(const CMatrix& x);

struct BussgangOptions {
  int gridSize = 101;      // per axis, over the square enclosing the search disk
  double radius = 0.0;     // 0 selects 3 |alphaPrior|, or 3 when the prior mean is zero
  Complex alphaPrior{0.0, 0.0};
  int dopplerGrid = 64;    // moving variant only
  int movingGridSize = 31;
  int polishIterations = 200;
};

struct BussgangFit {
  CMatrix rGamma;  // gamma gamma^H
  CMatrix rBar;    // arcsine image, unit diagonal
  double radius = 0.0;
  int gridSize = 0;
};

BussgangFit bussgang_fit(const QuantizedObservation& obs);

// || rBar - N(|a|^2 s~ s~^H + l l^H + R - (a s~ l^H + a^* l s~^H)) ||_F^2
double bussgang_objective(const BussgangFit& fit, Complex alpha, const CVector& signature, const CVector& lambda,
                          const CMatrix& r);

TargetEstimate estimate_bussgang(const CVector& s, const CMatrix& r, const QuantizedObservation& obs,
                                 std::optional<double> nu = std::nullopt, bool searchDoppler = false,
                                 const BussgangOptions& options = {});

// Minimizes f over R^d from `start` with initial simplex edge `step`.
struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
};
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                             double step, int maxIter, double tol = 1e-10);

}  // namespace onebit
