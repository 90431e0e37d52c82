#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "onebit/common.hpp"
#include "onebit/linalg.hpp"
#include "onebit/sampling.hpp"

namespace onebit {

// sign * (x[index] - threshold) >= 0; an infinite threshold is always satisfied.
struct Halfspace {
  Eigen::Index index = 0;
  int sign = 1;
  double threshold = 0.0;
};

struct Interval {
  Eigen::Index index = 0;
  double lower = 0.0;
  double upper = 0.0;
};

struct Bounds {
  RVector lower;
  RVector upper;
};

/// Real 2N-dimensional quadratic program
///
///     minimize    x^T M x + ridge * ||x - ridgeCenter||^2
///     subject to  halfspace and interval constraints on single coordinates,
///
/// where x = [Re y; Im y] and M is the real embedding of B^H R^{-1} B.
struct SignConstrainedQP {
  RMatrix form;
  std::vector<Halfspace> halfspaces;
  std::vector<Interval> intervals;
  std::vector<Eigen::Index> freeVariables;  // coordinates explicitly left unconstrained
  double ridge = 0.0;
  RVector ridgeCenter;
  CVector signature;  // s~ = s or s . p(nu); B s~ = 0

  Eigen::Index dimension() const { return form.rows(); }
  double objective(const RVector& x) const;
  double unridged_objective(const RVector& x) const;
  RVector gradient(const RVector& x) const;
  // Per-coordinate intersection of all constraints; lower > upper marks a contradiction.
  Bounds bounds() const;
  // Shape checks, PSD check on the form, and the every-variable-constrained-or-free rule.
  void validate() const;
};

enum class SolverStatus { Optimal, MaxIter, InfeasibleInput };
enum class SolverBackend { Auto, ActiveSet, ProjectedGradient };

std::string to_string(SolverStatus s);
std::string to_string(SolverBackend b);
SolverBackend solver_backend_from_string(const std::string& name);

struct SolverOptions {
  double tol = 1e-8;
  int maxIter = 0;  // 0 selects the backend default: 10 N for active-set, 5000 for projected gradient
  SolverBackend backend = SolverBackend::Auto;
  int autoSwitchN = 512;  // Auto uses projected gradient from this many complex samples on
};

struct QPSolution {
  RVector x;
  double objective = 0.0;
  double kktResidual = 0.0;
  int iterations = 0;
  SolverStatus status = SolverStatus::Optimal;
  SolverBackend backend = SolverBackend::ActiveSet;
  std::vector<double> objectiveHistory;

  CVector y() const { return unstack_real(x); }
};

struct RecoveryOptions {
  std::optional<double> ridge;  // absolute value; overrides ridgeScale
  double ridgeScale = 1e-6;     // ridge = ridgeScale * trace(R^{-1}) / N
};

SignConstrainedQP build_recovery_qp(const CVector& s, const CVector& w, const HermitianFactor& r,
                                    const QuantizedObservation& obs, std::optional<double> nu,
                                    const RecoveryOptions& options = {});
SignConstrainedQP build_recovery_qp(const CVector& s, const CVector& w, const CMatrix& r,
                                    const QuantizedObservation& obs, std::optional<double> nu,
                                    const RecoveryOptions& options = {});

// warmStart, when given, is projected onto the feasible box before use.
QPSolution solve(const SignConstrainedQP& qp, const SolverOptions& options = {},
                 const RVector* warmStart = nullptr);

// max over coordinates of stationarity, feasibility and complementarity violations.
double kkt_check(const SignConstrainedQP& qp, const RVector& x);

/// Box-constrained convex quadratic
///     minimize 0.5 z^T H z + g^T z   subject to lower <= z <= upper
/// solved by a primal active-set method in the style of Lawson-Hanson NNLS.
struct BoxQPResult {
  RVector z;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};
BoxQPResult solve_box_qp_active_set(const RMatrix& h, const RVector& g, const RVector& lower,
                                    const RVector& upper, const RVector& start, double tol, int maxIter);
// Monotone FISTA with projection onto the box.
BoxQPResult solve_box_qp_projected_gradient(const RMatrix& h, const RVector& g, const RVector& lower,
                                            const RVector& upper, const RVector& start, double tol,
                                            int maxIter);

// Dimensions, the quadratic form as CSV, then "sign index threshold" triplets.
void dump_qp(const SignConstrainedQP& qp, std::ostream& out);

}  // namespace onebit
