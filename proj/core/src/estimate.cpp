#include "onebit/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace onebit {

namespace {

CVector signature_at(const CVector& s, std::optional<double> nu) {
  if (!nu) return s;
  return s.cwiseProduct(steering_vector(*nu, s.size()));
}

// sum_k a_k z^k by Horner's rule.
Complex horner(const CVector& a, Complex z) {
  Complex acc(0.0, 0.0);
  for (Eigen::Index k = a.size() - 1; k >= 0; --k) acc = acc * z + a(k);
  return acc;
}

}  // namespace

std::string to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::Proposed: return "proposed";
    case EstimateMethod::Bussgang: return "bussgang";
    case EstimateMethod::FullPrecision: return "fullPrecision";
  }
  return "unknown";
}

EstimateMethod estimate_method_from_string(const std::string& name) {
  if (name == "proposed") return EstimateMethod::Proposed;
  if (name == "bussgang") return EstimateMethod::Bussgang;
  if (name == "fullPrecision") return EstimateMethod::FullPrecision;
  throw InvalidArgument("unknown method '" + name + "' (expected proposed, bussgang, fullPrecision)");
}

ReceiveFilter mmf_filter(const CVector& signature, const HermitianFactor& r) {
  require(signature.size() == r.size(), "mmf_filter: dimension mismatch");
  ReceiveFilter f{r.solve(signature)};
  if (!f.w.allFinite()) throw NumericalError("mmf_filter: non-finite filter");
  return f;
}

ReceiveFilter mmf_filter(const CVector& signature, const CMatrix& r) { return mmf_filter(signature, HermitianFactor(r)); }

Complex mmf_estimate_alpha(const CVector& w, const CVector& y, const CVector& signature) {
  require(w.size() == y.size() && w.size() == signature.size(), "mmf_estimate_alpha: dimension mismatch");
  const Complex den = w.dot(signature);
  if (std::abs(den) <= 1e-12) throw DegenerateFilterError("mmf_estimate_alpha: |w^H s~| <= 1e-12");
  return w.dot(y) / den;
}

double wls_objective(const CVector& y, Complex alpha, double nu, const CVector& s, const HermitianFactor& r) {
  require(y.size() == s.size() && r.size() == s.size(), "wls_objective: dimension mismatch");
  const CVector resid = y - alpha * s.cwiseProduct(steering_vector(nu, s.size()));
  return r.whiten(resid).squaredNorm();
}

double wls_objective(const CVector& y, Complex alpha, double nu, const CVector& s, const CMatrix& r) {
  return wls_objective(y, alpha, nu, s, HermitianFactor(r));
}

TargetEstimate estimate_stationary(const CVector& s, const HermitianFactor& r, const QuantizedObservation& obs,
                                   const StationaryOptions& options) {
  require(obs.length() == s.size(), "estimate_stationary: observation length does not match the sequence");
  const ReceiveFilter f = mmf_filter(s, r);
  const SignConstrainedQP qp = build_recovery_qp(s, f.w, r, obs, std::nullopt, options.recovery);
  const QPSolution sol = solve(qp, options.solver);

  TargetEstimate est;
  est.method = EstimateMethod::Proposed;
  est.yHat = sol.y();
  est.alphaHat = mmf_estimate_alpha(f.w, est.yHat, s);
  est.objective = sol.objective;
  est.cycles = 1;
  est.solverStatus = to_string(sol.status);
  est.kktResidual = sol.kktResidual;
  est.iterations = sol.iterations;
  est.objectiveHistory = sol.objectiveHistory;
  return est;
}

TargetEstimate estimate_stationary(const TransmitSequence& s, const StationaryInterferenceModel& m,
                                   const QuantizedObservation& obs, const StationaryOptions& options) {
  const HermitianFactor r(stationary_covariance(s, m));
  return estimate_stationary(s.samples(), r, obs, options);
}

TargetEstimate estimate_full_precision(const CVector& s, const HermitianFactor& r, const CVector& y,
                                       std::optional<double> nu, bool searchDoppler,
                                       const DopplerSearchOptions& search) {
  require(y.size() == s.size(), "estimate_full_precision: dimension mismatch");
  if (!nu && searchDoppler) {
    DopplerSpectrum spectrum(s, r);
    spectrum.set_observation(y);
    nu = spectrum.argmin(search);
  }
  const CVector sig = signature_at(s, nu);
  const ReceiveFilter f = mmf_filter(sig, r);

  TargetEstimate est;
  est.method = EstimateMethod::FullPrecision;
  est.yHat = y;
  est.alphaHat = mmf_estimate_alpha(f.w, y, sig);
  est.nuHat = nu.value_or(0.0);
  est.objective = r.whiten(CVector(y - est.alphaHat * sig)).squaredNorm();
  est.cycles = 0;
  return est;
}

double doppler_objective_g(double nu, const CVector& y, const CVector& s, const HermitianFactor& r,
                           const std::optional<CVector>& w) {
  const Eigen::Index n = s.size();
  require(y.size() == n && r.size() == n, "doppler_objective_g: dimension mismatch");
  const CVector p = steering_vector(nu, n);
  const CVector sig = s.cwiseProduct(p);
  const CVector filter = w ? *w : r.solve(sig);
  const Complex alpha = mmf_estimate_alpha(filter, y, sig);

  const CMatrix rinv = r.inverse();
  // row vector -(alpha s)^T . (y^H R^{-1})
  const Eigen::RowVectorXcd yhRinv = (rinv * y).adjoint();
  const Eigen::RowVectorXcd cross = -(alpha * s).transpose().cwiseProduct(yhRinv);
  const CMatrix quad = rinv.cwiseProduct((s * s.adjoint()).conjugate());
  const Complex linear = (cross * p)(0);
  const Complex quadratic = p.dot(quad * p);
  return 2.0 * linear.real() + std::norm(alpha) * quadratic.real();
}

DopplerSpectrum::DopplerSpectrum(const CVector& s, const HermitianFactor& r) : r_(&r), s_(s) {
  const Eigen::Index n = s.size();
  require(r.size() == n && n > 0, "DopplerSpectrum: dimension mismatch");
  const CMatrix rinv = r.inverse();
  lagCoeffs_ = CVector::Zero(n);
  // c_d = sum_{b - a = d} conj(s_a) [R^{-1}]_{ab} s_b
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) lagCoeffs_(b - a) += std::conj(s(a)) * rinv(a, b) * s(b);
  }
  weighted_ = CVector::Zero(n);
}

void DopplerSpectrum::set_observation(const CVector& y) {
  require(y.size() == s_.size(), "DopplerSpectrum: observation length mismatch");
  weighted_ = s_.conjugate().cwiseProduct(r_->solve(y));
}

double DopplerSpectrum::value(double nu) const {
  const Complex z = std::polar(1.0, 2.0 * kPi * nu);
  // s~^H R^{-1} s~ = c_0 + 2 Re sum_{d>0} c_d z^d
  const double den = 2.0 * horner(lagCoeffs_, z).real() - lagCoeffs_(0).real();
  // s~^H R^{-1} y = sum_n weighted_n z^{-n}
  const Complex num = horner(weighted_, std::conj(z));
  if (!(den > 0.0)) throw NumericalError("DopplerSpectrum: nonpositive signature energy");
  return -std::norm(num) / den;
}

double DopplerSpectrum::argmin(const DopplerSearchOptions& options) const {
  require(options.gridPoints >= 2, "Doppler search: grid must have at least two points");
  require(options.refineWidth > 0.0, "Doppler search: refinement width must be positive");
  long grid = options.gridPoints;
  while (grid < 2 * static_cast<long>(s_.size())) grid *= 2;
  const double h = 1.0 / static_cast<double>(grid);

  double bestNu = -0.5;
  double bestVal = std::numeric_limits<double>::infinity();
  for (long i = 0; i < grid; ++i) {
    const double nu = -0.5 + static_cast<double>(i) * h;
    const double v = value(nu);
    if (v < bestVal) {
      bestVal = v;
      bestNu = nu;
    }
  }

  const double invPhi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = bestNu - h;
  double b = bestNu + h;
  double c = b - invPhi * (b - a);
  double d = a + invPhi * (b - a);
  double fc = value(c);
  double fd = value(d);
  while (b - a > options.refineWidth) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invPhi * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invPhi * (b - a);
      fd = value(d);
    }
  }
  const double mid = 0.5 * (a + b);
  return value(mid) <= bestVal ? wrap_doppler(mid) : wrap_doppler(bestNu);
}

namespace {

// Unquantized stand-in for y used only to seed the Doppler: the threshold mean
// pushed by a typical magnitude in the direction each sign bit points.
CVector sign_proxy(const QuantizedObservation& obs, double amplitude) {
  const Eigen::Index n = obs.length();
  const CVector center = obs.thresholds.mean_threshold();
  CVector proxy(n);
  if (obs.is_p_bit()) {
    const auto& bank = obs.thresholds;
    const int levels = static_cast<int>(bank.realLevels.cols());
    const auto channel = [&](const RMatrix& lv, Eigen::Index i, int k) {
      if (k == 0) return lv(i, 0) - amplitude;
      if (k == levels) return lv(i, levels - 1) + amplitude;
      return 0.5 * (lv(i, k - 1) + lv(i, k));
    };
    for (Eigen::Index i = 0; i < n; ++i) {
      proxy(i) = Complex(channel(bank.realLevels, i, obs.bucketR(i)), channel(bank.imagLevels, i, obs.bucketI(i)));
    }
    return proxy;
  }
  RVector re = RVector::Zero(n);
  RVector im = RVector::Zero(n);
  for (std::size_t k = 0; k < obs.comparators(); ++k) {
    re += obs.gammaR[k].cast<double>();
    im += obs.gammaI[k].cast<double>();
  }
  const double scale = amplitude / static_cast<double>(obs.comparators());
  for (Eigen::Index i = 0; i < n; ++i) proxy(i) = center(i) + scale * Complex(re(i), im(i));
  return proxy;
}

}  // namespace

TargetEstimate estimate_moving(const CVector& s, const HermitianFactor& r, const QuantizedObservation& obs,
                               const MovingOptions& options) {
  const Eigen::Index n = s.size();
  require(obs.length() == n && r.size() == n, "estimate_moving: dimension mismatch");
  require(options.maxCycles >= 1, "estimate_moving: maxCycles must be >= 1");
  require(options.tol >= 0.0, "estimate_moving: tolerance must be nonnegative");

  DopplerSpectrum spectrum(s, r);
  double nu = 0.0;
  if (options.initialNu) {
    nu = wrap_doppler(*options.initialNu);
  } else {
    const double traceR = r.lower().squaredNorm();  // tr(L L^H)
    const double amplitude = std::sqrt((traceR / static_cast<double>(n) + options.alphaPriorPower) / kPi);
    spectrum.set_observation(sign_proxy(obs, amplitude));
    nu = spectrum.argmin(options.search);
  }

  TargetEstimate est;
  est.method = EstimateMethod::Proposed;
  RVector warm;
  double previous = std::numeric_limits<double>::infinity();
  bool converged = false;
  QPSolution last;
  for (int cycle = 1; cycle <= options.maxCycles; ++cycle) {
    // (1) filter and (2) recovery at the current Doppler
    const CVector sig = signature_at(s, nu);
    const ReceiveFilter f = mmf_filter(sig, r);
    const SignConstrainedQP qp = build_recovery_qp(s, f.w, r, obs, nu, options.recovery);
    last = solve(qp, options.solver, warm.size() ? &warm : nullptr);
    warm = last.x;
    est.iterations += last.iterations;
    const CVector y = last.y();

    // (3) Doppler update at fixed y; the ridge term does not depend on nu, so
    // comparing concentrated objectives is enough.
    spectrum.set_observation(y);
    const double nuBefore = nu;
    const double candidate = spectrum.argmin(options.search);
    if (spectrum.value(candidate) < spectrum.value(nu)) nu = candidate;

    const double yRy = r.whiten(y).squaredNorm();
    const double ridgeTerm = last.objective - last.x.dot(qp.form * last.x);
    double current = yRy + spectrum.value(nu) + ridgeTerm;

    // Alternating y/nu updates creep when the two blocks are strongly coupled.
    // Probe nu further along this cycle's step, re-solving the recovery each
    // time, and keep the point only when the joint objective drops.
    if (options.extrapolate && nu != nuBefore) {
      const double step = wrap_doppler(nu - nuBefore);
      for (double mult = 2.0; mult <= options.maxExtrapolation; mult *= 2.0) {
        const double probe = wrap_doppler(nuBefore + mult * step);
        const CVector probeSig = signature_at(s, probe);
        const SignConstrainedQP probeQp = build_recovery_qp(s, mmf_filter(probeSig, r).w, r, obs, probe, options.recovery);
        const QPSolution probeSol = solve(probeQp, options.solver, &warm);
        est.iterations += probeSol.iterations;
        if (probeSol.status != SolverStatus::Optimal || !(probeSol.objective < current)) break;
        nu = probe;
        current = probeSol.objective;
        last = probeSol;
        warm = probeSol.x;
      }
    }
    est.objectiveHistory.push_back(current);
    est.cycles = cycle;
    est.yHat = last.y();
    est.objective = current;
    if (cycle > 1 && previous - current < options.tol * std::max(std::abs(previous), 1e-300)) {
      converged = true;
      break;
    }
    previous = current;
  }

  const CVector sig = signature_at(s, nu);
  const ReceiveFilter f = mmf_filter(sig, r);
  est.alphaHat = mmf_estimate_alpha(f.w, est.yHat, sig);
  est.nuHat = wrap_doppler(nu);
  est.kktResidual = last.kktResidual;
  if (last.status != SolverStatus::Optimal) {
    est.solverStatus = to_string(last.status);
  } else {
    est.solverStatus = converged ? to_string(last.status) : "maxCycles";
  }
  return est;
}

TargetEstimate estimate_moving(const TransmitSequence& s, const MovingClutterModel& m,
                               const QuantizedObservation& obs, const MovingOptions& options) {
  const HermitianFactor r(total_covariance_moving(moving_clutter_covariance(s, m), m.gamma));
  return estimate_moving(s.samples(), r, obs, options);
}

double arcsine_law(double rho) {
  require(rho >= -1.0 && rho <= 1.0, "arcsine_law: correlation must lie in [-1, 1]");
  return 2.0 / kPi * std::asin(rho);
}

CMatrix arcsine_map(const CMatrix& x) {
  return x.unaryExpr([](const Complex& v) {
    return Complex(std::sin(0.5 * kPi * v.real()), std::sin(0.5 * kPi * v.imag()));
  });
}

CMatrix normalize_covariance(const CMatrix& x) {
  require(x.rows() == x.cols(), "normalize_covariance: matrix must be square");
  RVector scale(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double d = x(i, i).real();
    scale(i) = 1.0 / std::sqrt(d > 0.0 ? d : 1e-12);
  }
  CMatrix out = scale.asDiagonal() * x * scale.asDiagonal();
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, i) = Complex(out(i, i).real(), 0.0);
  return out;
}

BussgangFit bussgang_fit(const QuantizedObservation& obs) {
  require(!obs.is_p_bit(), "bussgang_fit: p-bit observations are not supported");
  require(obs.comparators() >= 1, "bussgang_fit: observation has no sign bits");
  const CVector g = obs.gamma(0);
  BussgangFit fit;
  fit.rGamma = g * g.adjoint();
  fit.rBar = normalize_covariance(arcsine_map(fit.rGamma));
  return fit;
}

double bussgang_objective(const BussgangFit& fit, Complex alpha, const CVector& signature, const CVector& lambda,
                          const CMatrix& r) {
  const Eigen::Index n = signature.size();
  // model covariance of y - lambda: v v^H + R with v = alpha s~ - lambda
  const CVector v = alpha * signature - lambda;
  RVector invSd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = std::norm(v(i)) + r(i, i).real();
    invSd(i) = 1.0 / std::sqrt(d > 0.0 ? d : 1e-12);
  }
  double total = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    const Complex vb = std::conj(v(b));
    for (Eigen::Index a = 0; a < n; ++a) {
      const Complex model = (v(a) * vb + r(a, b)) * (invSd(a) * invSd(b));
      total += std::norm(fit.rBar(a, b) - model);
    }
  }
  return total;
}

TargetEstimate estimate_bussgang(const CVector& s, const CMatrix& r, const QuantizedObservation& obs,
                                 std::optional<double> nu, bool searchDoppler, const BussgangOptions& options) {
  const Eigen::Index n = s.size();
  require(obs.length() == n && r.rows() == n && r.cols() == n, "estimate_bussgang: dimension mismatch");
  require(options.gridSize >= 2 && options.movingGridSize >= 2 && options.dopplerGrid >= 1,
          "estimate_bussgang: grid sizes too small");
  BussgangFit fit = bussgang_fit(obs);
  const CVector& lambda = obs.thresholds.vectors.front();
  double radius = options.radius;
  if (radius <= 0.0) radius = std::abs(options.alphaPrior) > 0.0 ? 3.0 * std::abs(options.alphaPrior) : 3.0;
  fit.radius = radius;

  const bool moving = !nu && searchDoppler;
  const int grid = moving ? options.movingGridSize : options.gridSize;
  fit.gridSize = grid;
  const double cell = 2.0 * radius / static_cast<double>(grid - 1);

  std::vector<double> nuGrid;
  if (moving) {
    for (int k = 0; k < options.dopplerGrid; ++k) {
      nuGrid.push_back(-0.5 + static_cast<double>(k) / static_cast<double>(options.dopplerGrid));
    }
  } else {
    nuGrid.push_back(nu.value_or(0.0));
  }

  double best = std::numeric_limits<double>::infinity();
  Complex bestAlpha(0.0, 0.0);
  double bestNu = nuGrid.front();
  for (const double cand : nuGrid) {
    const CVector sig = (moving || nu) ? signature_at(s, cand) : s;
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        const Complex a(-radius + cell * i, -radius + cell * j);
        if (std::abs(a) > radius + 1e-12) continue;
        const double v = bussgang_objective(fit, a, sig, lambda, r);
        if (v < best) {
          best = v;
          bestAlpha = a;
          bestNu = cand;
        }
      }
    }
  }

  TargetEstimate est;
  est.method = EstimateMethod::Bussgang;
  if (moving) {
    const auto f = [&](const std::vector<double>& x) {
      return bussgang_objective(fit, Complex(x[0], x[1]), signature_at(s, x[2]), lambda, r);
    };
    // Doppler simplex edge shrunk so it is comparable to an alpha cell
    const double nuStep = 1.0 / static_cast<double>(options.dopplerGrid);
    const auto scaled = [&](const std::vector<double>& x) {
      return f({x[0], x[1], x[2] * nuStep / cell});
    };
    const NelderMeadResult nm = nelder_mead(scaled, {bestAlpha.real(), bestAlpha.imag(), bestNu * cell / nuStep},
                                            cell, options.polishIterations);
    if (nm.value < best) {
      best = nm.value;
      bestAlpha = Complex(nm.x[0], nm.x[1]);
      bestNu = nm.x[2] * nuStep / cell;
    }
    est.nuHat = wrap_doppler(bestNu);
  } else {
    const CVector sig = signature_at(s, nu);
    const auto f = [&](const std::vector<double>& x) {
      return bussgang_objective(fit, Complex(x[0], x[1]), sig, lambda, r);
    };
    const NelderMeadResult nm = nelder_mead(f, {bestAlpha.real(), bestAlpha.imag()}, cell, options.polishIterations);
    if (nm.value < best) {
      best = nm.value;
      bestAlpha = Complex(nm.x[0], nm.x[1]);
    }
    est.nuHat = nu.value_or(0.0);
  }
  est.alphaHat = bestAlpha;
  est.objective = best;
  est.cycles = 0;
  return est;
}

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                             double step, int maxIter, double tol) {
  const std::size_t d = start.size();
  require(d >= 1, "nelder_mead: empty start point");
  std::vector<std::vector<double>> pts(d + 1, start);
  for (std::size_t i = 0; i < d; ++i) pts[i + 1][i] += step;
  std::vector<double> vals(d + 1);
  for (std::size_t i = 0; i <= d; ++i) vals[i] = f(pts[i]);

  const auto combine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = a[i] + t * (b[i] - a[i]);
    return out;
  };

  NelderMeadResult res;
  std::vector<std::size_t> order(d + 1);
  for (res.iterations = 0; res.iterations < maxIter; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t lo = order.front();
    const std::size_t hi = order.back();
    const std::size_t second = order[d - 1];
    if (std::abs(vals[hi] - vals[lo]) <= tol * (std::abs(vals[lo]) + tol)) break;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t k = 0; k <= d; ++k) {
      if (k == hi) continue;
      for (std::size_t i = 0; i < d; ++i) centroid[i] += pts[k][i] / static_cast<double>(d);
    }
    const auto reflected = combine(centroid, pts[hi], -1.0);
    const double fr = f(reflected);
    if (fr < vals[lo]) {
      const auto expanded = combine(centroid, pts[hi], -2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        pts[hi] = expanded;
        vals[hi] = fe;
      } else {
        pts[hi] = reflected;
        vals[hi] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[hi] = reflected;
      vals[hi] = fr;
      continue;
    }
    const bool outside = fr < vals[hi];
    const auto contracted = combine(centroid, outside ? reflected : pts[hi], 0.5);
    const double fc = f(contracted);
    if (fc < (outside ? fr : vals[hi])) {
      pts[hi] = contracted;
      vals[hi] = fc;
      continue;
    }
    for (std::size_t k = 0; k <= d; ++k) {
      if (k == lo) continue;
      pts[k] = combine(pts[lo], pts[k], 0.5);
      vals[k] = f(pts[k]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

}  // namespace onebit
