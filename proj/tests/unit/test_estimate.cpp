#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "onebit/estimate.hpp"
#include "onebit/linalg.hpp"
#include "onebit/model.hpp"
#include "onebit/sampling.hpp"

using namespace onebit;

namespace {

struct Scene {
  TransmitSequence s;
  CMatrix r;
  CVector y;
};

Scene stationary_scene(int n, std::uint64_t seed, Complex alpha, double beta = 0.1, double noiseVar = 0.1) {
  Scene sc;
  sc.s = generate_unimodular_sequence(n, SequenceKind::RandomPhase, seed);
  const StationaryInterferenceModel m{beta, noiseVar * CMatrix::Identity(n, n)};
  sc.r = stationary_covariance(sc.s, m);
  sc.y = synthesize_stationary_scene(sc.s, alpha, m, seed + 1000).y;
  return sc;
}

}  // namespace

TEST(Mmf, DiagonalCovarianceExample) {
  CVector s(2);
  s << 1.0, 1.0;
  CMatrix r = CMatrix::Zero(2, 2);
  r(0, 0) = 1.0;
  r(1, 1) = 2.0;
  const auto f = mmf_filter(s, r);
  // the factorization adds a 1e-12 diagonal jitter
  EXPECT_NEAR(std::abs(f.w(0) - Complex(1.0, 0)), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(f.w(1) - Complex(0.5, 0)), 0.0, 1e-10);
  CVector y(2);
  y << Complex(2, 0), Complex(4, 0);
  // (1*2 + 0.5*4) / 1.5
  EXPECT_NEAR(std::abs(mmf_estimate_alpha(f.w, y, s) - Complex(8.0 / 3.0, 0)), 0.0, 1e-10);
}

TEST(Mmf, RecoversScaledSignatureExactly) {
  const auto sc = stationary_scene(16, 3, Complex(0, 0));
  const Complex alpha(0.7, -1.1);
  const auto est = estimate_full_precision(sc.s.samples(), HermitianFactor(sc.r), alpha * sc.s.samples());
  EXPECT_LT(std::abs(est.alphaHat - alpha), 1e-10);
  EXPECT_EQ(est.method, EstimateMethod::FullPrecision);
  EXPECT_EQ(est.solverStatus, "ok");
}

TEST(Mmf, DegenerateFilterRejected) {
  CVector w(2), s(2), y(2);
  w << 1.0, -1.0;
  s << 1.0, 1.0;
  y << 1.0, 2.0;
  EXPECT_THROW(mmf_estimate_alpha(w, y, s), DegenerateFilterError);
}

TEST(Mmf, MinimizesWeightedLeastSquares) {
  const auto sc = stationary_scene(12, 5, Complex(0.4, 0.9));
  const HermitianFactor f(sc.r);
  const auto est = estimate_full_precision(sc.s.samples(), f, sc.y);
  const double best = wls_objective(sc.y, est.alphaHat, 0.0, sc.s.samples(), f);
  EXPECT_NEAR(est.objective, best, 1e-9 * (1.0 + best));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    const Complex a = est.alphaHat + 0.1 * Complex(g(rng), g(rng));
    EXPECT_GE(wls_objective(sc.y, a, 0.0, sc.s.samples(), f), best - 1e-10);
  }
  // normal equations: s^H R^{-1} (y - alpha s) = 0
  const CVector resid = sc.y - est.alphaHat * sc.s.samples();
  EXPECT_LT(std::abs(sc.s.samples().dot(f.solve(resid))), 1e-9);
}

TEST(DopplerObjective, EqualsConcentratedWlsCost) {
  const int n = 10;
  const auto s = generate_unimodular_sequence(n, SequenceKind::RandomPhase, 4);
  const CMatrix r = stationary_covariance(s, {0.1, 0.1 * CMatrix::Identity(n, n)});
  const HermitianFactor f(r);
  std::mt19937_64 rng(9);
  const CVector y = standard_complex_normal(n, rng);
  const double yRy = f.whiten(y).squaredNorm();
  DopplerSpectrum spectrum(s.samples(), f);
  spectrum.set_observation(y);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int t = 0; t < 100; ++t) {
    const double nu = u(rng);
    const CVector sig = s.samples().cwiseProduct(steering_vector(nu, n));
    const Complex alpha = mmf_estimate_alpha(f.solve(sig), y, sig);
    const double wls = wls_objective(y, alpha, nu, s.samples(), f);
    const double g = doppler_objective_g(nu, y, s.samples(), f);
    EXPECT_NEAR(g + yRy, wls, 1e-9 * (1.0 + wls));
    EXPECT_NEAR(spectrum.value(nu), g, 1e-9 * (1.0 + std::abs(g)));
    const double closed = -std::norm(sig.dot(f.solve(y))) / sig.dot(f.solve(sig)).real();
    EXPECT_NEAR(g, closed, 1e-9 * (1.0 + std::abs(g)));
  }
}

TEST(DopplerObjective, MinimumAtTrueDopplerWithoutInterference) {
  const int n = 32;
  const auto s = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const HermitianFactor f(CMatrix(CMatrix::Identity(n, n)));
  const double nu0 = 0.173;
  const CVector y = Complex(0.8, 0.3) * s.samples().cwiseProduct(steering_vector(nu0, n));
  DopplerSpectrum spectrum(s.samples(), f);
  spectrum.set_observation(y);
  EXPECT_NEAR(spectrum.argmin(), nu0, 1e-6);
  // g* is 1-periodic
  EXPECT_NEAR(spectrum.value(nu0 - 1.0), spectrum.value(nu0), 1e-9);
}

TEST(DopplerObjective, ConjugateSymmetryForRealSequence) {
  // real s, real R and real y make g even in nu
  const int n = 9;
  CVector sv(n);
  std::mt19937_64 rng(4);
  for (int i = 0; i < n; ++i) sv(i) = (rng() & 1) ? 1.0 : -1.0;
  const auto s = TransmitSequence::from_samples(sv);
  const CMatrix r = stationary_covariance(s, {0.2, 0.1 * CMatrix::Identity(n, n)});
  const HermitianFactor f(r);
  std::normal_distribution<double> g;
  CVector y(n);
  for (int i = 0; i < n; ++i) y(i) = g(rng);
  for (const double nu : {0.05, 0.17, 0.33, 0.49}) {
    EXPECT_NEAR(doppler_objective_g(nu, y, s.samples(), f), doppler_objective_g(-nu, y, s.samples(), f), 1e-10);
  }
}

TEST(FullPrecision, DopplerSearchFindsTarget) {
  const int n = 50;
  const auto s = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const auto m = MovingClutterModel::uniform(2, 10, 0.01, 0.0, 0.2, 0.1 * CMatrix::Identity(n, n));
  const auto scene = synthesize_moving_scene(s, Complex(1.0, 0.5), -0.31, m, 17);
  const HermitianFactor f(total_covariance_moving(moving_clutter_covariance(s, m), m.gamma));
  const auto est = estimate_full_precision(s.samples(), f, scene.y, std::nullopt, true);
  EXPECT_NEAR(est.nuHat, -0.31, 0.01);
  EXPECT_LT(std::abs(est.alphaHat - Complex(1.0, 0.5)), 0.3);
}

TEST(Stationary, ZeroThresholdNoiseFreeCollapsesToZero) {
  // With all thresholds at the origin the sign pattern is scale-free, and the
  // feasible origin has zero cost.
  const int n = 10;
  const auto s = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const StationaryInterferenceModel m{0.1, 0.1 * CMatrix::Identity(n, n)};
  const auto obs = quantize_one_bit(Complex(1.2, -0.4) * s.samples(), CVector::Zero(n));
  const auto est = estimate_stationary(s, m, obs);
  EXPECT_EQ(est.solverStatus, "optimal");
  EXPECT_LT(std::abs(est.alphaHat), 1e-9);
}

TEST(Stationary, ThresholdAtScaledTruthIsRecovered) {
  // Noise-free y = a s with lambda = 0.9 a s: lambda is feasible with zero cost,
  // so the estimate lands on 0.9 a.
  const int n = 10;
  const auto s = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const StationaryInterferenceModel m{0.1, 0.1 * CMatrix::Identity(n, n)};
  const Complex a(0.6, 0.8);
  const auto obs = quantize_one_bit(a * s.samples(), 0.9 * a * s.samples());
  const auto est = estimate_stationary(s, m, obs);
  EXPECT_NEAR(std::abs(est.alphaHat - a) / std::abs(a), 0.1, 1e-6);
  const auto zero = estimate_stationary(s, m, quantize_one_bit(a * s.samples(), CVector::Zero(n)));
  EXPECT_LT(std::abs(est.alphaHat - a), std::abs(zero.alphaHat - a));
}

TEST(Stationary, ReportsSolverDiagnostics) {
  const auto sc = stationary_scene(25, 8, Complex(1.0, 0.0));
  const auto lambdas = design_threshold_random(sc.s.samples(), {Complex(0, 0), 1.25}, sc.r, 1, std::nullopt, 3);
  const auto obs = quantize_one_bit(sc.y, lambdas[0]);
  const auto est = estimate_stationary(sc.s.samples(), HermitianFactor(sc.r), obs);
  EXPECT_EQ(est.solverStatus, "optimal");
  EXPECT_LE(est.kktResidual, 1e-8);
  EXPECT_GT(est.iterations, 0);
  EXPECT_EQ(est.yHat.size(), 25);
  EXPECT_FALSE(est.objectiveHistory.empty());
  // the recovered samples satisfy every observed sign
  for (Eigen::Index i = 0; i < 25; ++i) {
    EXPECT_GE(obs.gammaR[0](i) * (est.yHat(i).real() - lambdas[0](i).real()), -1e-9);
    EXPECT_GE(obs.gammaI[0](i) * (est.yHat(i).imag() - lambdas[0](i).imag()), -1e-9);
  }
}

TEST(Moving, StaticTargetWithoutClutter) {
  const int n = 64;
  const auto s = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const CMatrix r = 0.01 * CMatrix::Identity(n, n);
  const Complex a(1.0, 0.0);
  std::mt19937_64 rng(6);
  const CVector y = a * s.samples() + ComplexGaussianSampler(r).draw(rng);
  const auto lambdas = design_threshold_random(s.samples(), {Complex(0, 0), 1.25}, r, 1,
                                               DopplerPrior::uniform(-0.4, 0.4), rng);
  const auto obs = quantize_one_bit(y, lambdas[0]);
  MovingOptions opt;
  opt.alphaPriorPower = 1.25;
  const auto est = estimate_moving(s.samples(), HermitianFactor(r), obs, opt);
  EXPECT_LT(std::abs(est.nuHat), 0.01);
  EXPECT_GE(est.cycles, 1);
}

TEST(Moving, CycleObjectiveNeverIncreases) {
  const int n = 25;
  const auto s = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const auto m = MovingClutterModel::uniform(2, 10, 0.01, 0.0, 0.2, 0.1 * CMatrix::Identity(n, n));
  const CMatrix r = total_covariance_moving(moving_clutter_covariance(s, m), m.gamma);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto scene = synthesize_moving_scene(s, Complex(0.9, 0.3), 0.21, m, seed);
    const auto lambdas = design_threshold_random(s.samples(), {Complex(0, 0), 1.25}, r, 1,
                                                 DopplerPrior::uniform(-0.4, 0.4), seed + 50);
    MovingOptions opt;
    opt.alphaPriorPower = 1.25;
    const auto est = estimate_moving(s.samples(), HermitianFactor(r), quantize_one_bit(scene.y, lambdas[0]), opt);
    ASSERT_EQ(static_cast<int>(est.objectiveHistory.size()), est.cycles);
    for (std::size_t i = 1; i < est.objectiveHistory.size(); ++i) {
      const double prev = est.objectiveHistory[i - 1];
      EXPECT_LE(est.objectiveHistory[i], prev + 1e-10 * std::max(1.0, std::abs(prev))) << "seed " << seed;
    }
    EXPECT_GE(est.nuHat, -0.5);
    EXPECT_LT(est.nuHat, 0.5);
  }
}

TEST(Moving, CycleCapReported) {
  const int n = 16;
  const auto s = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const CMatrix r = 0.1 * CMatrix::Identity(n, n);
  const auto lambdas = design_threshold_random(s.samples(), {Complex(0, 0), 1.25}, r, 1, std::nullopt, 4);
  const auto obs = quantize_one_bit(s.samples(), lambdas[0]);
  MovingOptions opt;
  opt.maxCycles = 1;
  opt.initialNu = 0.3;
  const auto est = estimate_moving(s.samples(), HermitianFactor(r), obs, opt);
  EXPECT_EQ(est.cycles, 1);
  EXPECT_EQ(est.solverStatus, "maxCycles");
  opt.maxCycles = 0;
  EXPECT_THROW(estimate_moving(s.samples(), HermitianFactor(r), obs, opt), InvalidArgument);
}

TEST(Bussgang, ArcsineLawValues) {
  EXPECT_DOUBLE_EQ(arcsine_law(1.0), 1.0);
  EXPECT_DOUBLE_EQ(arcsine_law(0.0), 0.0);
  EXPECT_NEAR(arcsine_law(0.5), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(arcsine_law(1.5), InvalidArgument);
}

TEST(Bussgang, ArcsineLawMatchesSignCorrelation) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  for (const double rho : {-0.8, -0.3, 0.2, 0.6, 0.95}) {
    const int draws = 200000;
    double acc = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double a = g(rng);
      const double b = rho * a + std::sqrt(1.0 - rho * rho) * g(rng);
      acc += sign_bit(a) * sign_bit(b);
    }
    EXPECT_NEAR(acc / draws, arcsine_law(rho), 0.01) << "rho " << rho;
  }
}

TEST(Bussgang, MapIsEntrywiseSine) {
  CMatrix x(2, 2);
  x << Complex(1.0, 0.0), Complex(0.5, -0.5), Complex(0.5, 0.5), Complex(1.0, 0.0);
  const CMatrix m = arcsine_map(x);
  EXPECT_NEAR(m(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(m(0, 1).real(), std::sin(kPi / 4), 1e-15);
  EXPECT_NEAR(m(0, 1).imag(), -std::sin(kPi / 4), 1e-15);
}

TEST(Bussgang, MapFixesOneSnapshotSignCovariance) {
  std::mt19937_64 rng(2);
  const auto obs = quantize_one_bit(standard_complex_normal(8, rng), CVector::Zero(8));
  const CVector gamma = obs.gamma();
  const CMatrix rg = gamma * gamma.adjoint();
  EXPECT_LT((arcsine_map(rg) - rg).cwiseAbs().maxCoeff(), 1e-12);
  const auto fit = bussgang_fit(obs);
  EXPECT_LT((fit.rGamma - rg).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((fit.rBar.diagonal() - CVector::Ones(8)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Bussgang, NormalizationGivesUnitDiagonal) {
  std::mt19937_64 rng(3);
  CMatrix a(5, 5);
  for (auto& v : a.reshaped()) v = standard_complex_normal(1, rng)(0);
  const CMatrix pd = a * a.adjoint() + 0.1 * CMatrix::Identity(5, 5);
  const CMatrix nrm = normalize_covariance(pd);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(std::abs(nrm(i, i) - Complex(1, 0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(nrm(0, 1) - pd(0, 1) / std::sqrt(pd(0, 0).real() * pd(1, 1).real())), 0.0, 1e-12);
  EXPECT_TRUE(normalize_covariance(CMatrix::Zero(2, 2)).allFinite());
}

TEST(Bussgang, EstimateBeatsCoarseGrid) {
  const auto sc = stationary_scene(10, 21, Complex(0.8, -0.6));
  const auto lambdas = design_threshold_random(sc.s.samples(), {Complex(0, 0), 1.25}, sc.r, 1, std::nullopt, 5);
  const auto obs = quantize_one_bit(sc.y, lambdas[0]);
  const auto est = estimate_bussgang(sc.s.samples(), sc.r, obs);
  const auto fit = bussgang_fit(obs);
  const double at = bussgang_objective(fit, est.alphaHat, sc.s.samples(), lambdas[0], sc.r);
  EXPECT_NEAR(est.objective, at, 1e-9 * (1.0 + at));
  for (int i = -20; i <= 20; ++i) {
    for (int j = -20; j <= 20; ++j) {
      const Complex a(3.0 * i / 20.0, 3.0 * j / 20.0);
      if (std::abs(a) > 3.0) continue;
      EXPECT_LE(at, bussgang_objective(fit, a, sc.s.samples(), lambdas[0], sc.r) + 1e-9);
    }
  }
  EXPECT_LE(std::abs(est.alphaHat), 3.0 + 1e-12);
  EXPECT_EQ(est.method, EstimateMethod::Bussgang);
}

TEST(Bussgang, RejectsMultiBitObservations) {
  const auto sc = stationary_scene(6, 2, Complex(1, 0));
  const auto bank = default_p_bit_levels(2, {CVector::Zero(6), sc.r});
  EXPECT_THROW(bussgang_fit(quantize_p_bit(sc.y, bank)), InvalidArgument);
}

TEST(NelderMead, Rosenbrock) {
  const auto f = [](const std::vector<double>& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const auto r = nelder_mead(f, {-1.2, 1.0}, 0.5, 5000, 1e-14);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
  EXPECT_LT(r.value, 1e-8);
}

TEST(NelderMead, QuadraticBowl3D) {
  const auto f = [](const std::vector<double>& x) {
    return std::pow(x[0] - 1, 2) + 2 * std::pow(x[1] + 2, 2) + 3 * std::pow(x[2] - 0.5, 2);
  };
  const auto r = nelder_mead(f, {0.0, 0.0, 0.0}, 1.0, 2000);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], -2.0, 1e-4);
  EXPECT_NEAR(r.x[2], 0.5, 1e-4);
}

TEST(MethodNames, RoundTrip) {
  for (const auto m : {EstimateMethod::Proposed, EstimateMethod::Bussgang, EstimateMethod::FullPrecision}) {
    EXPECT_EQ(estimate_method_from_string(to_string(m)), m);
  }
  EXPECT_THROW(estimate_method_from_string("mle"), InvalidArgument);
}
