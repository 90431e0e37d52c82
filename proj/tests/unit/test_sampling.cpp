#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "onebit/linalg.hpp"
#include "onebit/model.hpp"
#include "onebit/sampling.hpp"

using namespace onebit;

TEST(OneBit, ZeroMapsToPlusOne) {
  const auto obs = quantize_one_bit(CVector::Zero(4), CVector::Zero(4));
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_EQ(obs.gammaR[0](i), 1);
    EXPECT_EQ(obs.gammaI[0](i), 1);
  }
}

TEST(OneBit, GammaOfFirstQuadrant) {
  CVector y(1);
  y << Complex(1, 1);
  const auto obs = quantize_one_bit(y, CVector::Zero(1));
  const Complex expected = Complex(1, 1) / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(obs.gamma()(0) - expected), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(std::abs(obs.gamma()(0)), 1.0);
}

TEST(OneBit, ThresholdAboveEverythingFlipsAllSigns) {
  std::mt19937_64 rng(4);
  const CVector y = standard_complex_normal(50, rng);
  CVector high(50);
  for (Eigen::Index i = 0; i < 50; ++i) high(i) = Complex(y(i).real() + 0.1, y(i).imag() + 0.1);
  const auto obs = quantize_one_bit(y, high);
  EXPECT_EQ(obs.gammaR[0].maxCoeff(), -1);
  EXPECT_EQ(obs.gammaI[0].maxCoeff(), -1);
}

TEST(OneBit, LengthMismatchRejected) {
  EXPECT_THROW(quantize_one_bit(CVector::Zero(3), CVector::Zero(4)), InvalidArgument);
}

TEST(OneBit, OmegaAccessorsAreSignDiagonals) {
  std::mt19937_64 rng(5);
  const CVector y = standard_complex_normal(6, rng);
  const auto obs = quantize_one_bit(y, CVector::Zero(6));
  const RMatrix wr = obs.omega_r().toDenseMatrix();
  for (Eigen::Index i = 0; i < 6; ++i) {
    EXPECT_EQ(wr(i, i), y(i).real() >= 0 ? 1.0 : -1.0);
    EXPECT_GE(wr(i, i) * y(i).real(), 0.0);
    EXPECT_GE(obs.omega_i().diagonal()(i) * y(i).imag(), 0.0);
  }
}

TEST(OneBit, PositiveScalingAboutThresholdInvariant) {
  std::mt19937_64 rng(6);
  const CVector y = standard_complex_normal(40, rng);
  const CVector lambda = standard_complex_normal(40, rng);
  const auto base = quantize_one_bit(y, lambda);
  for (const double c : {0.01, 0.5, 3.0, 1e4}) {
    const auto scaled = quantize_one_bit(c * (y - lambda) + lambda, lambda);
    EXPECT_TRUE(scaled.gammaR[0] == base.gammaR[0]);
    EXPECT_TRUE(scaled.gammaI[0] == base.gammaI[0]);
  }
}

TEST(OneBit, OwnObservationIsStrictlyFeasible) {
  std::mt19937_64 rng(7);
  const CVector y = standard_complex_normal(30, rng);
  const CVector lambda = standard_complex_normal(30, rng);
  const auto obs = quantize_one_bit(y, lambda);
  for (Eigen::Index i = 0; i < 30; ++i) {
    EXPECT_GT(obs.gammaR[0](i) * (y(i).real() - lambda(i).real()), 0.0);
    EXPECT_GT(obs.gammaI[0](i) * (y(i).imag() - lambda(i).imag()), 0.0);
  }
}

TEST(Parallel, IdenticalComparatorsAgree) {
  std::mt19937_64 rng(8);
  const CVector y = standard_complex_normal(12, rng);
  const CVector lambda = standard_complex_normal(12, rng);
  const auto obs = quantize_parallel(y, {lambda, lambda, lambda});
  ASSERT_EQ(obs.comparators(), 3u);
  EXPECT_EQ(obs.thresholds.kind, BankKind::Parallel);
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_TRUE(obs.gammaR[k] == obs.gammaR[0]);
    EXPECT_TRUE(obs.gammaI[k] == obs.gammaI[0]);
  }
}

TEST(PBit, OneBitReduction) {
  std::mt19937_64 rng(9);
  const CVector y = standard_complex_normal(20, rng);
  const CVector lambda = standard_complex_normal(20, rng);
  const auto bank = ThresholdBank::p_bit(1, lambda.real(), lambda.imag());
  const auto pb = quantize_p_bit(y, bank);
  const auto ob = quantize_one_bit(y, lambda);
  for (Eigen::Index i = 0; i < 20; ++i) {
    EXPECT_EQ(pb.bucketR(i), ob.gammaR[0](i) > 0 ? 1 : 0);
    EXPECT_EQ(pb.bucketI(i), ob.gammaI[0](i) > 0 ? 1 : 0);
  }
}

TEST(PBit, IntervalLookup) {
  RMatrix levels(1, 3);
  levels << -1.0, 0.0, 1.0;
  const auto bank = ThresholdBank::p_bit(2, levels, levels);
  CVector y(1);
  y << Complex(0.5, -3.0);
  const auto obs = quantize_p_bit(y, bank);
  EXPECT_EQ(obs.bucketR(0), 2);
  EXPECT_EQ(obs.bucketI(0), 0);
}

TEST(PBit, TiesGoToUpperBucket) {
  RMatrix levels(1, 3);
  levels << -1.0, 0.0, 1.0;
  const auto bank = ThresholdBank::p_bit(2, levels, levels);
  CVector y(1);
  y << Complex(0.0, 1.0);
  const auto obs = quantize_p_bit(y, bank);
  EXPECT_EQ(obs.bucketR(0), 2);
  EXPECT_EQ(obs.bucketI(0), 3);
}

TEST(PBit, NonMonotoneLevelsRejected) {
  RMatrix bad(1, 3);
  bad << -1.0, 1.0, 0.5;
  RMatrix good(1, 3);
  good << -1.0, 0.0, 1.0;
  EXPECT_THROW(ThresholdBank::p_bit(2, bad, good), InvalidArgument);
  EXPECT_THROW(ThresholdBank::p_bit(2, good, good.leftCols(2)), InvalidArgument);
}

TEST(PBit, BucketsMonotoneInValue) {
  RMatrix levels(1, 7);
  levels << -3, -2, -1, 0, 1, 2, 3;
  const auto bank = ThresholdBank::p_bit(3, levels, levels);
  int prev = -1;
  for (double v = -4.0; v <= 4.0; v += 0.01) {
    CVector y(1);
    y << Complex(v, 0.0);
    const int b = quantize_p_bit(y, bank).bucketR(0);
    EXPECT_GE(b, prev);
    prev = b;
  }
  EXPECT_EQ(prev, 7);
}

TEST(Design, MeanThreshold) {
  const auto s = generate_unimodular_sequence(16, SequenceKind::RandomPhase, 3);
  EXPECT_EQ(design_threshold_mean(s.samples(), Complex(0, 0)).cwiseAbs().maxCoeff(), 0.0);
  const CVector l = design_threshold_mean(s.samples(), Complex(0.5, 0.5));
  for (Eigen::Index i = 0; i < l.size(); ++i) EXPECT_NEAR(std::abs(l(i)), std::abs(Complex(0.5, 0.5)), 1e-12);
}

TEST(Design, RandomThresholdSampleMean) {
  const auto s = generate_unimodular_sequence(4, SequenceKind::QuadraticPhase, 0);
  const Complex prior(0.5, -0.25);
  const CMatrix r = 0.2 * CMatrix::Identity(4, 4);
  const auto draws = design_threshold_random(s.samples(), {prior, 0.0}, r, 10000, std::nullopt, 31);
  CVector mean = CVector::Zero(4);
  for (const auto& d : draws) mean += d;
  mean /= static_cast<double>(draws.size());
  EXPECT_LT((mean - prior * s.samples()).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Design, RandomThresholdSampleCovariance) {
  const auto s = generate_unimodular_sequence(4, SequenceKind::RandomPhase, 1);
  const AlphaPrior prior{Complex(0.3, 0.1), 1.25};
  const CMatrix r = stationary_covariance(s, {0.1, 0.1 * CMatrix::Identity(4, 4)});
  const auto draws = design_threshold_random(s.samples(), prior, r, 100000, std::nullopt, 32);
  const CVector mu = prior.mean * s.samples();
  CMatrix cov = CMatrix::Zero(4, 4);
  for (const auto& d : draws) cov += (d - mu) * (d - mu).adjoint();
  cov /= static_cast<double>(draws.size());
  const CMatrix target = prior.power * s.samples() * s.samples().adjoint() + r;
  EXPECT_LT((cov - target).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Design, ZeroDopplerReducesToStationary) {
  const auto s = generate_unimodular_sequence(6, SequenceKind::RandomPhase, 2);
  const CMatrix r = 0.3 * CMatrix::Identity(6, 6);
  const AlphaPrior prior{Complex(0.2, 0.4), 0.7};
  const auto a = predict_signal(s.samples(), prior, r, std::nullopt);
  const auto b = predict_signal(s.samples(), prior, r, DopplerPrior::point(0.0));
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((a.covariance - b.covariance).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Design, UniformDopplerMomentsMatchQuadrature) {
  const double lo = -0.2;
  const double hi = 0.3;
  const auto prior = DopplerPrior::uniform(lo, hi);
  const int n = 5;
  CVector mean = CVector::Zero(n);
  CMatrix moment = CMatrix::Zero(n, n);
  const int steps = 20000;
  for (int i = 0; i < steps; ++i) {
    const double nu = lo + (hi - lo) * (i + 0.5) / steps;
    const CVector p = steering_vector(nu, n);
    mean += p / static_cast<double>(steps);
    moment += p * p.adjoint() / static_cast<double>(steps);
  }
  EXPECT_LT((prior.mean_steering(n) - mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((prior.steering_moment(n) - moment).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Design, NonPsdCovarianceRejected) {
  const auto s = generate_unimodular_sequence(3, SequenceKind::QuadraticPhase, 0);
  CMatrix r = CMatrix::Identity(3, 3);
  r(1, 1) = -2.0;
  EXPECT_THROW(design_threshold_random(s.samples(), {Complex(0, 0), 0.0}, r, 1, std::nullopt, 1), InvalidArgument);
  EXPECT_THROW(design_threshold_random(s.samples(), {Complex(0, 0), 0.0}, CMatrix::Identity(3, 3), 0, std::nullopt, 1),
               InvalidArgument);
}

TEST(Design, SameSeedSameThresholds) {
  const auto s = generate_unimodular_sequence(8, SequenceKind::RandomPhase, 2);
  const CMatrix r = 0.3 * CMatrix::Identity(8, 8);
  const auto a = design_threshold_random(s.samples(), {Complex(0, 0), 1.0}, r, 2, std::nullopt, 77);
  const auto b = design_threshold_random(s.samples(), {Complex(0, 0), 1.0}, r, 2, std::nullopt, 77);
  EXPECT_TRUE(a[0] == b[0]);
  EXPECT_TRUE(a[1] == b[1]);
  EXPECT_FALSE(a[0] == a[1]);
}

TEST(Design, DefaultPBitLevelsSpanThreeSigma) {
  PredictedSignal pred;
  pred.mean = CVector::Constant(3, Complex(1.0, -1.0));
  pred.covariance = 2.0 * CMatrix::Identity(3, 3);  // one unit of variance per channel
  const auto bank = default_p_bit_levels(2, pred);
  ASSERT_EQ(bank.realLevels.cols(), 3);
  EXPECT_NEAR(bank.realLevels(0, 0), 1.0 - 1.5, 1e-12);
  EXPECT_NEAR(bank.realLevels(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(bank.realLevels(0, 2), 1.0 + 1.5, 1e-12);
  EXPECT_NEAR(bank.imagLevels(2, 1), -1.0, 1e-12);
  EXPECT_NO_THROW(bank.validate());
  const CVector centre = bank.mean_threshold();
  EXPECT_NEAR(std::abs(centre(1) - Complex(1.0, -1.0)), 0.0, 1e-12);
}
