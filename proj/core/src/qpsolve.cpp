#include "onebit/qpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "onebit/model.hpp"

namespace onebit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Stationarity, feasibility and complementarity of a box-constrained problem
// with objective gradient `grad` at point z.
double box_kkt_residual(const RVector& z, const RVector& grad, const RVector& lower, const RVector& upper) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double g = grad(i);
    const bool hasLo = std::isfinite(lower(i));
    const bool hasHi = std::isfinite(upper(i));
    const double muLo = hasLo ? std::max(g, 0.0) : 0.0;
    const double muHi = hasHi ? std::max(-g, 0.0) : 0.0;
    const double stationarity = std::abs(g - muLo + muHi);
    double feasibility = 0.0;
    if (hasLo) feasibility = std::max(feasibility, lower(i) - z(i));
    if (hasHi) feasibility = std::max(feasibility, z(i) - upper(i));
    double complementarity = 0.0;
    if (hasLo) complementarity = std::max(complementarity, std::min(muLo, std::max(z(i) - lower(i), 0.0)));
    if (hasHi) complementarity = std::max(complementarity, std::min(muHi, std::max(upper(i) - z(i), 0.0)));
    worst = std::max({worst, stationarity, feasibility, complementarity});
  }
  return worst;
}

RVector clamp_to(const RVector& x, const RVector& lower, const RVector& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

double quadratic_value(const RMatrix& h, const RVector& g, const RVector& z) {
  return 0.5 * z.dot(h * z) + g.dot(z);
}

enum class Slot : unsigned char { Free, AtLower, AtUpper };

// Solves the equality-constrained subproblem on the free coordinates.
RVector solve_free_system(const RMatrix& hff, const RVector& rhs) {
  Eigen::LLT<RMatrix> llt(hff);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  // semidefinite subproblem (zero ridge): minimum-norm step
  return Eigen::CompleteOrthogonalDecomposition<RMatrix>(hff).solve(rhs);
}

class ActiveSetSolver {
 public:
  ActiveSetSolver(const RMatrix& h, const RVector& g, const RVector& lower, const RVector& upper)
      : h_(h), g_(g), lower_(lower), upper_(upper), slots_(static_cast<std::size_t>(h.rows()), Slot::Free) {}

  BoxQPResult run(const RVector& start, double tol, int maxIter) {
    BoxQPResult res;
    z_ = clamp_to(start, lower_, upper_);
    for (Eigen::Index i = 0; i < z_.size(); ++i) {
      if (std::isfinite(lower_(i)) && z_(i) <= lower_(i)) {
        slots_[idx(i)] = Slot::AtLower;
        z_(i) = lower_(i);
      } else if (std::isfinite(upper_(i)) && z_(i) >= upper_(i)) {
        slots_[idx(i)] = Slot::AtUpper;
        z_(i) = upper_(i);
      }
    }
    res.history.push_back(quadratic_value(h_, g_, z_));
    minimize_on_free_set(res.history);

    std::vector<char> blocked(slots_.size(), 0);
    for (;;) {
      const RVector grad = h_ * z_ + g_;
      Eigen::Index entering = -1;
      double worst = tol;
      for (Eigen::Index i = 0; i < z_.size(); ++i) {
        if (blocked[idx(i)]) continue;
        double violation = 0.0;
        if (slots_[idx(i)] == Slot::AtLower) violation = -grad(i);
        else if (slots_[idx(i)] == Slot::AtUpper) violation = grad(i);
        if (violation > worst) {
          worst = violation;
          entering = i;
        }
      }
      if (entering < 0) {
        res.converged = true;
        break;
      }
      if (res.iterations >= maxIter) break;
      ++res.iterations;

      const double before = res.history.back();
      slots_[idx(entering)] = Slot::Free;
      minimize_on_free_set(res.history);
      const bool stalled = slots_[idx(entering)] != Slot::Free && res.history.back() >= before;
      if (stalled) {
        blocked[idx(entering)] = 1;
      } else {
        std::fill(blocked.begin(), blocked.end(), 0);
      }
    }
    res.z = z_;
    return res;
  }

 private:
  static std::size_t idx(Eigen::Index i) { return static_cast<std::size_t>(i); }

  void minimize_on_free_set(std::vector<double>& history) {
    const Eigen::Index n = z_.size();
    for (Eigen::Index guard = 0; guard <= n + 1; ++guard) {
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (slots_[idx(i)] == Slot::Free) free.push_back(i);
      }
      if (free.empty()) return;
      const auto k = static_cast<Eigen::Index>(free.size());
      RMatrix hff(k, k);
      RVector rhs(k);
      const RVector grad = h_ * z_ + g_;
      RVector zf(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) hff(a, b) = h_(free[idx(a)], free[idx(b)]);
        zf(a) = z_(free[idx(a)]);
      }
      // H_FF z* = -(g_F + H_FB z_B) = -grad_F + H_FF z_F
      for (Eigen::Index a = 0; a < k; ++a) rhs(a) = -grad(free[idx(a)]);
      rhs += hff * zf;
      const RVector target = solve_free_system(hff, rhs);

      double step = 1.0;
      for (Eigen::Index a = 0; a < k; ++a) {
        const Eigen::Index i = free[idx(a)];
        const double cur = z_(i);
        const double nxt = target(a);
        if (nxt < lower_(i)) {
          const double denom = cur - nxt;
          step = std::min(step, denom > 0.0 ? std::max(cur - lower_(i), 0.0) / denom : 0.0);
        } else if (nxt > upper_(i)) {
          const double denom = nxt - cur;
          step = std::min(step, denom > 0.0 ? std::max(upper_(i) - cur, 0.0) / denom : 0.0);
        }
      }
      for (Eigen::Index a = 0; a < k; ++a) {
        const Eigen::Index i = free[idx(a)];
        z_(i) += step * (target(a) - z_(i));
      }
      if (step >= 1.0) {
        history.push_back(quadratic_value(h_, g_, z_));
        return;
      }
      // pin every coordinate that reached (or rounded past) a bound
      for (Eigen::Index a = 0; a < k; ++a) {
        const Eigen::Index i = free[idx(a)];
        const double nxt = target(a);
        const double tolLo = 1e-13 * (1.0 + std::abs(lower_(i)));
        const double tolHi = 1e-13 * (1.0 + std::abs(upper_(i)));
        if (std::isfinite(lower_(i)) && nxt < lower_(i) && z_(i) <= lower_(i) + tolLo) {
          z_(i) = lower_(i);
          slots_[idx(i)] = Slot::AtLower;
        } else if (std::isfinite(upper_(i)) && nxt > upper_(i) && z_(i) >= upper_(i) - tolHi) {
          z_(i) = upper_(i);
          slots_[idx(i)] = Slot::AtUpper;
        }
      }
      history.push_back(quadratic_value(h_, g_, z_));
    }
  }

  const RMatrix& h_;
  const RVector& g_;
  const RVector& lower_;
  const RVector& upper_;
  std::vector<Slot> slots_;
  RVector z_;
};

double largest_eigenvalue(const RMatrix& h) {
  if (h.rows() <= 64) {
    Eigen::SelfAdjointEigenSolver<RMatrix> eig(h, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
  }
  RVector v = RVector::Ones(h.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    const RVector hv = h * v;
    const double norm = hv.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(hv);
    v = hv / norm;
    if (std::abs(next - lambda) <= 1e-9 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // power iteration approaches from below
  return lambda * 1.05;
}

}  // namespace

BoxQPResult solve_box_qp_active_set(const RMatrix& h, const RVector& g, const RVector& lower,
                                    const RVector& upper, const RVector& start, double tol, int maxIter) {
  ActiveSetSolver solver(h, g, lower, upper);
  return solver.run(start, tol, maxIter);
}

BoxQPResult solve_box_qp_projected_gradient(const RMatrix& h, const RVector& g, const RVector& lower,
                                            const RVector& upper, const RVector& start, double tol,
                                            int maxIter) {
  BoxQPResult res;
  const double lip = std::max(largest_eigenvalue(h), 1e-300);
  RVector x = clamp_to(start, lower, upper);
  RVector y = x;
  double fx = quadratic_value(h, g, x);
  double t = 1.0;
  res.history.push_back(fx);
  for (int it = 0; it < maxIter; ++it) {
    const RVector gy = h * y + g;
    const RVector z = clamp_to(y - gy / lip, lower, upper);
    const double fz = quadratic_value(h, g, z);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const RVector xPrev = x;
    if (fz <= fx) {
      x = z;
      fx = fz;
    }
    y = x + (t / tn) * (z - x) + ((t - 1.0) / tn) * (x - xPrev);
    t = tn;
    res.history.push_back(fx);
    res.iterations = it + 1;
    if ((it + 1) % 10 == 0 && box_kkt_residual(x, h * x + g, lower, upper) <= tol) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) res.converged = box_kkt_residual(x, h * x + g, lower, upper) <= tol;
  res.z = x;
  return res;
}

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Optimal: return "optimal";
    case SolverStatus::MaxIter: return "maxIter";
    case SolverStatus::InfeasibleInput: return "infeasibleInput";
  }
  return "unknown";
}

std::string to_string(SolverBackend b) {
  switch (b) {
    case SolverBackend::Auto: return "auto";
    case SolverBackend::ActiveSet: return "activeSet";
    case SolverBackend::ProjectedGradient: return "projectedGradient";
  }
  return "unknown";
}

SolverBackend solver_backend_from_string(const std::string& name) {
  if (name == "auto") return SolverBackend::Auto;
  if (name == "activeSet") return SolverBackend::ActiveSet;
  if (name == "projectedGradient") return SolverBackend::ProjectedGradient;
  throw InvalidArgument("unknown solver backend '" + name + "' (expected auto, activeSet, projectedGradient)");
}

double SignConstrainedQP::unridged_objective(const RVector& x) const { return x.dot(form * x); }

double SignConstrainedQP::objective(const RVector& x) const {
  double f = unridged_objective(x);
  if (ridge > 0.0) f += ridge * (x - ridgeCenter).squaredNorm();
  return f;
}

RVector SignConstrainedQP::gradient(const RVector& x) const {
  RVector g = 2.0 * (form * x);
  if (ridge > 0.0) g += 2.0 * ridge * (x - ridgeCenter);
  return g;
}

Bounds SignConstrainedQP::bounds() const {
  const Eigen::Index n = dimension();
  Bounds b{RVector::Constant(n, -kInf), RVector::Constant(n, kInf)};
  for (const auto& h : halfspaces) {
    if (h.sign > 0) b.lower(h.index) = std::max(b.lower(h.index), h.threshold);
    else b.upper(h.index) = std::min(b.upper(h.index), h.threshold);
  }
  for (const auto& iv : intervals) {
    b.lower(iv.index) = std::max(b.lower(iv.index), iv.lower);
    b.upper(iv.index) = std::min(b.upper(iv.index), iv.upper);
  }
  return b;
}

void SignConstrainedQP::validate() const {
  const Eigen::Index n = dimension();
  require(n > 0 && form.cols() == n, "QP: quadratic form must be square and non-empty");
  require(ridge >= 0.0, "QP: ridge must be nonnegative");
  require(ridgeCenter.size() == n, "QP: ridge center dimension mismatch");
  const double scale = std::max(1.0, form.cwiseAbs().maxCoeff());
  require((form - form.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, "QP: quadratic form not symmetric");
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(form, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() >= -1e-10 * scale, "QP: quadratic form not positive semidefinite");
  std::vector<char> covered(static_cast<std::size_t>(n), 0);
  for (const auto& h : halfspaces) {
    require(h.index >= 0 && h.index < n, "QP: halfspace index out of range");
    require(h.sign == 1 || h.sign == -1, "QP: halfspace sign must be +1 or -1");
    covered[static_cast<std::size_t>(h.index)] = 1;
  }
  for (const auto& iv : intervals) {
    require(iv.index >= 0 && iv.index < n, "QP: interval index out of range");
    covered[static_cast<std::size_t>(iv.index)] = 1;
  }
  for (const auto i : freeVariables) {
    require(i >= 0 && i < n, "QP: free variable index out of range");
    covered[static_cast<std::size_t>(i)] = 1;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!covered[static_cast<std::size_t>(i)]) {
      throw InvalidArgument("QP: variable " + std::to_string(i) + " has no constraint and is not declared free");
    }
  }
}

SignConstrainedQP build_recovery_qp(const CVector& s, const CVector& w, const HermitianFactor& r,
                                    const QuantizedObservation& obs, std::optional<double> nu,
                                    const RecoveryOptions& options) {
  const Eigen::Index n = s.size();
  require(n > 0, "build_recovery_qp: empty sequence");
  require(w.size() == n && r.size() == n, "build_recovery_qp: dimension mismatch");
  require(obs.length() == n, "build_recovery_qp: observation length does not match the sequence");

  const CVector sig = nu ? CVector(s.cwiseProduct(steering_vector(*nu, n))) : s;
  const Complex den = w.dot(sig);  // w^H s~
  if (std::abs(den) < 1e-12) throw DegenerateFilterError("build_recovery_qp: |w^H s~| < 1e-12");

  const CMatrix b = CMatrix::Identity(n, n) - (sig * w.adjoint()) / den;
  const CMatrix whitened = r.whiten(b);
  CMatrix hermitian = whitened.adjoint() * whitened;
  hermitian = 0.5 * (hermitian + hermitian.adjoint());

  SignConstrainedQP qp;
  qp.form = real_embedding(hermitian);
  qp.signature = sig;
  if (options.ridge) {
    qp.ridge = *options.ridge;
  } else {
    // trace(R^{-1}) = ||L^{-1}||_F^2
    const double traceInv = r.whiten(CMatrix(CMatrix::Identity(n, n))).squaredNorm();
    qp.ridge = options.ridgeScale * traceInv / static_cast<double>(n);
  }
  qp.ridgeCenter = stack_real(obs.thresholds.mean_threshold());

  if (obs.is_p_bit()) {
    const auto& bank = obs.thresholds;
    const int levels = static_cast<int>(bank.realLevels.cols());
    const auto lowerOf = [&](const RMatrix& lv, Eigen::Index i, int k) { return k == 0 ? -kInf : lv(i, k - 1); };
    const auto upperOf = [&](const RMatrix& lv, Eigen::Index i, int k) { return k == levels ? kInf : lv(i, k); };
    for (Eigen::Index i = 0; i < n; ++i) {
      const int kr = obs.bucketR(i);
      const int ki = obs.bucketI(i);
      require(kr >= 0 && kr <= levels && ki >= 0 && ki <= levels, "build_recovery_qp: bucket index out of range");
      qp.halfspaces.push_back({i, +1, lowerOf(bank.realLevels, i, kr)});
      qp.halfspaces.push_back({n + i, +1, lowerOf(bank.imagLevels, i, ki)});
      qp.halfspaces.push_back({i, -1, upperOf(bank.realLevels, i, kr)});
      qp.halfspaces.push_back({n + i, -1, upperOf(bank.imagLevels, i, ki)});
    }
    return qp;
  }

  require(obs.comparators() == obs.thresholds.vectors.size(), "build_recovery_qp: comparator count mismatch");
  for (std::size_t k = 0; k < obs.comparators(); ++k) {
    const CVector& lambda = obs.thresholds.vectors[k];
    for (Eigen::Index i = 0; i < n; ++i) {
      qp.halfspaces.push_back({i, obs.gammaR[k](i), lambda(i).real()});
      qp.halfspaces.push_back({n + i, obs.gammaI[k](i), lambda(i).imag()});
    }
  }
  return qp;
}

SignConstrainedQP build_recovery_qp(const CVector& s, const CVector& w, const CMatrix& r,
                                    const QuantizedObservation& obs, std::optional<double> nu,
                                    const RecoveryOptions& options) {
  return build_recovery_qp(s, w, HermitianFactor(r), obs, nu, options);
}

double kkt_check(const SignConstrainedQP& qp, const RVector& x) {
  require(x.size() == qp.dimension(), "kkt_check: dimension mismatch");
  const Bounds b = qp.bounds();
  return box_kkt_residual(x, qp.gradient(x), b.lower, b.upper);
}

QPSolution solve(const SignConstrainedQP& qp, const SolverOptions& options, const RVector* warmStart) {
  const Eigen::Index n = qp.dimension();
  require(n > 0 && qp.form.cols() == n && qp.ridgeCenter.size() == n, "solve: malformed QP");
  require(options.tol > 0.0, "solve: tolerance must be positive");
  const Bounds b = qp.bounds();

  QPSolution sol;
  if ((b.lower.array() > b.upper.array()).any()) {
    sol.status = SolverStatus::InfeasibleInput;
    sol.x = qp.ridgeCenter;
    sol.objective = qp.objective(sol.x);
    sol.kktResidual = kInf;
    return sol;
  }

  // Change of variables z = sigma (x - t) >= 0 per coordinate: the sign-constrained
  // program becomes a nonnegative (optionally upper-capped) least-squares problem.
  RVector sigma(n), shift(n), zLower(n), zUpper(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool hasLo = std::isfinite(b.lower(i));
    const bool hasHi = std::isfinite(b.upper(i));
    if (hasLo) {
      sigma(i) = 1.0;
      shift(i) = b.lower(i);
      zLower(i) = 0.0;
      zUpper(i) = hasHi ? b.upper(i) - b.lower(i) : kInf;
    } else if (hasHi) {
      sigma(i) = -1.0;
      shift(i) = b.upper(i);
      zLower(i) = 0.0;
      zUpper(i) = kInf;
    } else {
      sigma(i) = 1.0;
      shift(i) = 0.0;
      zLower(i) = -kInf;
      zUpper(i) = kInf;
    }
  }
  RMatrix hx = 2.0 * qp.form;
  hx.diagonal().array() += 2.0 * qp.ridge;
  const RMatrix h = sigma.asDiagonal() * hx * sigma.asDiagonal();
  const RVector g = sigma.cwiseProduct(hx * shift - 2.0 * qp.ridge * qp.ridgeCenter);
  const double offset = qp.objective(shift);

  const RVector x0 = clamp_to(warmStart ? *warmStart : qp.ridgeCenter, b.lower, b.upper);
  const RVector z0 = sigma.cwiseProduct(x0 - shift);

  SolverBackend backend = options.backend;
  if (backend == SolverBackend::Auto) {
    backend = n / 2 >= options.autoSwitchN ? SolverBackend::ProjectedGradient : SolverBackend::ActiveSet;
  }
  int maxIter = options.maxIter;
  if (maxIter <= 0) {
    maxIter = backend == SolverBackend::ActiveSet ? static_cast<int>(std::max<Eigen::Index>(10 * (n / 2), 10)) : 5000;
  }

  const auto run = [&](const RVector& start) {
    return backend == SolverBackend::ActiveSet
               ? solve_box_qp_active_set(h, g, zLower, zUpper, start, options.tol, maxIter)
               : solve_box_qp_projected_gradient(h, g, zLower, zUpper, start, options.tol, maxIter);
  };
  BoxQPResult res = run(z0);
  const auto toX = [&](const RVector& z) {
    return clamp_to(shift + sigma.cwiseProduct(z), b.lower, b.upper);
  };
  RVector x = toX(res.z);
  double kkt = kkt_check(qp, x);
  if (res.converged && kkt > options.tol && backend == SolverBackend::ActiveSet) {
    // one warm restart to wash out accumulated rounding
    BoxQPResult again = solve_box_qp_active_set(h, g, zLower, zUpper, res.z, options.tol, maxIter);
    const RVector x2 = toX(again.z);
    const double kkt2 = kkt_check(qp, x2);
    if (kkt2 < kkt && qp.objective(x2) <= qp.objective(x)) {
      res.iterations += again.iterations;
      res.history.insert(res.history.end(), again.history.begin(), again.history.end());
      res.converged = again.converged;
      x = x2;
      kkt = kkt2;
    }
  }

  sol.x = x;
  sol.objective = qp.objective(x);
  sol.kktResidual = kkt;
  sol.iterations = res.iterations;
  sol.backend = backend;
  sol.status = (res.converged && kkt <= options.tol) ? SolverStatus::Optimal : SolverStatus::MaxIter;
  sol.objectiveHistory.reserve(res.history.size());
  for (const double v : res.history) sol.objectiveHistory.push_back(v + offset);
  return sol;
}

void dump_qp(const SignConstrainedQP& qp, std::ostream& out) {
  out << std::setprecision(17);
  out << "# onebit-qp dimension=" << qp.dimension() << " halfspaces=" << qp.halfspaces.size()
      << " intervals=" << qp.intervals.size() << " free=" << qp.freeVariables.size() << " ridge=" << qp.ridge
      << "\n";
  out << "form\n";
  for (Eigen::Index i = 0; i < qp.form.rows(); ++i) {
    for (Eigen::Index j = 0; j < qp.form.cols(); ++j) out << (j ? "," : "") << qp.form(i, j);
    out << "\n";
  }
  out << "center\n";
  for (Eigen::Index i = 0; i < qp.ridgeCenter.size(); ++i) out << (i ? "," : "") << qp.ridgeCenter(i);
  out << "\nconstraints\n";
  for (const auto& h : qp.halfspaces) out << h.sign << "," << h.index << "," << h.threshold << "\n";
  out << "intervals\n";
  for (const auto& iv : qp.intervals) out << iv.index << "," << iv.lower << "," << iv.upper << "\n";
  out << "free\n";
  for (const auto i : qp.freeVariables) out << i << "\n";
}

}  // namespace onebit
