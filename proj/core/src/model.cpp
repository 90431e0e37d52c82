#include "onebit/model.hpp"

#include <cmath>

#include "onebit/linalg.hpp"

namespace onebit {

namespace {

double sinc(double x) { return std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x; }

void check_covariance_shape(const CMatrix& c, Eigen::Index n, const char* what) {
  if (c.rows() != n || c.cols() != n) {
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(n) + "x" +
                          std::to_string(n) + " covariance, got " + std::to_string(c.rows()) +
                          "x" + std::to_string(c.cols()));
  }
}

}  // namespace

TransmitSequence TransmitSequence::from_samples(CVector samples) {
  require(samples.size() > 0, "transmit sequence must be non-empty");
  const double energy = samples.squaredNorm();
  require(energy > 0.0 && std::isfinite(energy), "transmit sequence must have finite nonzero energy");
  samples *= std::sqrt(static_cast<double>(samples.size()) / energy);
  return TransmitSequence(std::move(samples));
}

TransmitSequence generate_unimodular_sequence(Eigen::Index n, SequenceKind kind, std::uint64_t seed) {
  require(n >= 1, "generate_unimodular_sequence: N must be >= 1");
  CVector s(n);
  if (kind == SequenceKind::QuadraticPhase) {
    const double nn = static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double phase = kPi * static_cast<double>(i * i) / nn;
      s(i) = std::polar(1.0, phase);
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = std::polar(1.0, phase(rng));
  }
  return TransmitSequence::from_samples(std::move(s));
}

CVector shift_apply(const CVector& s, int k) {
  const Eigen::Index n = s.size();
  if (std::abs(static_cast<Eigen::Index>(k)) >= n) {
    throw InvalidArgument("shift_apply: |k| must be <= N-1 (k=" + std::to_string(k) +
                          ", N=" + std::to_string(n) + ")");
  }
  CVector out = CVector::Zero(n);
  if (k >= 0) {
    out.tail(n - k) = s.head(n - k);
  } else {
    const Eigen::Index m = -k;
    out.head(n - m) = s.tail(n - m);
  }
  return out;
}

std::vector<int> delay_shift_indices(Eigen::Index n) {
  std::vector<int> ks;
  ks.reserve(static_cast<std::size_t>(2 * n - 1));
  for (int k = 0; k < n; ++k) ks.push_back(k);
  for (int k = -static_cast<int>(n - 1); k < 0; ++k) ks.push_back(k);
  return ks;
}

CMatrix delay_spread_matrix(const CVector& s) {
  const auto ks = delay_shift_indices(s.size());
  CMatrix a(s.size(), static_cast<Eigen::Index>(ks.size()));
  for (std::size_t c = 0; c < ks.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = shift_apply(s, ks[c]);
  return a;
}

CVector steering_vector(double nu, Eigen::Index n) {
  CVector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = std::polar(1.0, 2.0 * kPi * static_cast<double>(i) * nu);
  return p;
}

double wrap_doppler(double nu) {
  double w = nu - std::floor(nu + 0.5);
  if (w >= 0.5) w -= 1.0;
  return w;
}

void StationaryInterferenceModel::validate(Eigen::Index n) const {
  require(beta >= 0.0 && std::isfinite(beta), "stationary model: beta must be a nonnegative real");
  check_covariance_shape(gamma, n, "stationary model");
}

MovingClutterModel MovingClutterModel::uniform(int rings, int sectors, double cellPower, double nuCenter,
                                               double nuWidth, CMatrix gamma) {
  require(rings >= 1 && sectors >= 1, "moving clutter: Nc and L must be >= 1");
  MovingClutterModel m;
  m.rings = rings;
  m.sectors = sectors;
  m.sigmaSq = RMatrix::Constant(rings, sectors, cellPower);
  m.nuBar = RMatrix::Constant(rings, sectors, nuCenter);
  m.epsD = RMatrix::Constant(rings, sectors, nuWidth);
  m.gamma = std::move(gamma);
  return m;
}

void MovingClutterModel::validate(Eigen::Index n) const {
  require(rings >= 1 && sectors >= 1, "moving clutter: Nc and L must be >= 1");
  if (rings > n) {
    throw InvalidArgument("moving clutter: Nc=" + std::to_string(rings) + " exceeds N=" + std::to_string(n));
  }
  const auto shapeOk = [&](const RMatrix& x) { return x.rows() == rings && x.cols() == sectors; };
  require(shapeOk(sigmaSq) && shapeOk(nuBar) && shapeOk(epsD), "moving clutter: per-cell tables must be Nc x L");
  require((sigmaSq.array() >= 0.0).all(), "moving clutter: sigma^2 must be nonnegative");
  require((epsD.array() >= 0.0).all(), "moving clutter: Doppler spread must be nonnegative");
  require(((nuBar.array().abs() + 0.5 * epsD.array()) <= 0.5 + 1e-12).all(),
          "moving clutter: |nuBar| + epsD/2 must stay within 0.5");
  check_covariance_shape(gamma, n, "moving clutter");
}

CMatrix stationary_covariance(const TransmitSequence& s, const StationaryInterferenceModel& m) {
  const Eigen::Index n = s.length();
  m.validate(n);
  CMatrix r = CMatrix::Zero(n, n);
  if (m.beta > 0.0) {
    for (int k = 1; k < n; ++k) {
      const CVector delayed = shift_apply(s.samples(), k);
      const CVector advanced = shift_apply(s.samples(), -k);
      r.noalias() += delayed * delayed.adjoint();
      r.noalias() += advanced * advanced.adjoint();
    }
    r *= m.beta;
  }
  r += m.gamma;
  return r;
}

CMatrix doppler_covariance(Eigen::Index n, double nuBar, double epsD) {
  CMatrix c(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const double d = static_cast<double>(a - b);
      c(a, b) = std::polar(sinc(kPi * d * epsD), 2.0 * kPi * d * nuBar);
    }
  }
  return c;
}

CVector doppler_mean(Eigen::Index n, double nuBar, double epsD) {
  CVector p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = static_cast<double>(i);
    p(i) = std::polar(sinc(kPi * d * epsD), 2.0 * kPi * d * nuBar);
  }
  return p;
}

CMatrix moving_clutter_covariance(const TransmitSequence& s, const MovingClutterModel& m) {
  const Eigen::Index n = s.length();
  m.validate(n);
  const CVector& sv = s.samples();
  CMatrix sigma = CMatrix::Zero(n, n);
  for (int k = 0; k < m.rings; ++k) {
    for (int l = 0; l < m.sectors; ++l) {
      const double power = m.sigmaSq(k, l);
      if (power == 0.0) continue;
      // Phi = Diag(s) C_nu Diag(s)^H, then shifted by k along both axes.
      const CMatrix cnu = doppler_covariance(n - k, m.nuBar(k, l), m.epsD(k, l));
      const CVector head = sv.head(n - k);
      const CMatrix phi = head.asDiagonal() * cnu * head.conjugate().asDiagonal();
      sigma.bottomRightCorner(n - k, n - k) += power * phi;
    }
  }
  return 0.5 * (sigma + sigma.adjoint());
}

CMatrix total_covariance_moving(const CMatrix& clutterCov, const CMatrix& gamma) {
  require(clutterCov.rows() == gamma.rows() && clutterCov.cols() == gamma.cols(),
          "total_covariance_moving: dimension mismatch");
  return clutterCov + gamma;
}

ComplexGaussianSampler::ComplexGaussianSampler(const CMatrix& cov) {
  require(cov.rows() == cov.cols(), "covariance must be square");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  require(is_hermitian(cov, 1e-12 * scale), "covariance must be Hermitian");
  if (cov.isZero(0.0)) {
    lower_ = CMatrix::Zero(cov.rows(), cov.cols());
    return;
  }
  if (min_eigenvalue(cov) < -1e-10) throw InvalidArgument("covariance is not positive semidefinite");
  lower_ = HermitianFactor(cov, 1e-12).lower();
}

CVector ComplexGaussianSampler::draw(std::mt19937_64& rng) const {
  const CVector z = standard_complex_normal(lower_.rows(), rng);
  return lower_.triangularView<Eigen::Lower>() * z;
}

SceneRealization synthesize_stationary_scene(const TransmitSequence& s, Complex alpha0,
                                             const StationaryInterferenceModel& m, std::mt19937_64& rng) {
  const Eigen::Index n = s.length();
  m.validate(n);
  const ComplexGaussianSampler noise(m.gamma);
  SceneRealization r;
  r.alpha0 = alpha0;
  r.nu = 0.0;
  r.clutterCoeffs = std::sqrt(m.beta) * standard_complex_normal(2 * n - 2, rng);
  r.noise = noise.draw(rng);
  r.y = assemble_stationary(s, r);
  return r;
}

SceneRealization synthesize_stationary_scene(const TransmitSequence& s, Complex alpha0,
                                             const StationaryInterferenceModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return synthesize_stationary_scene(s, alpha0, m, rng);
}

SceneRealization synthesize_moving_scene(const TransmitSequence& s, Complex alpha0, double nu,
                                         const MovingClutterModel& m, std::mt19937_64& rng) {
  const Eigen::Index n = s.length();
  m.validate(n);
  require(nu >= -0.5 && nu < 0.5, "target Doppler must lie in [-0.5, 0.5)");
  const ComplexGaussianSampler noise(m.gamma);
  const Eigen::Index cells = static_cast<Eigen::Index>(m.rings) * m.sectors;
  SceneRealization r;
  r.alpha0 = alpha0;
  r.nu = nu;
  r.clutterCoeffs.resize(cells);
  r.clutterDoppler.resize(cells);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const CVector z = standard_complex_normal(cells, rng);
  for (int k = 0; k < m.rings; ++k) {
    for (int l = 0; l < m.sectors; ++l) {
      const Eigen::Index c = static_cast<Eigen::Index>(k) * m.sectors + l;
      r.clutterCoeffs(c) = std::sqrt(m.sigmaSq(k, l)) * z(c);
      r.clutterDoppler(c) = m.nuBar(k, l) + m.epsD(k, l) * (unit(rng) - 0.5);
    }
  }
  r.noise = noise.draw(rng);
  r.y = assemble_moving(s, m, r);
  return r;
}

SceneRealization synthesize_moving_scene(const TransmitSequence& s, Complex alpha0, double nu,
                                         const MovingClutterModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return synthesize_moving_scene(s, alpha0, nu, m, rng);
}

CVector assemble_stationary(const TransmitSequence& s, const SceneRealization& r) {
  const Eigen::Index n = s.length();
  require(r.clutterCoeffs.size() == 2 * n - 2 && r.noise.size() == n, "assemble_stationary: bad realization shape");
  CVector y = r.alpha0 * s.samples() + r.noise;
  const auto ks = delay_shift_indices(n);
  for (std::size_t c = 1; c < ks.size(); ++c) {
    y += r.clutterCoeffs(static_cast<Eigen::Index>(c - 1)) * shift_apply(s.samples(), ks[c]);
  }
  return y;
}

CVector assemble_moving(const TransmitSequence& s, const MovingClutterModel& m, const SceneRealization& r) {
  const Eigen::Index n = s.length();
  const Eigen::Index cells = static_cast<Eigen::Index>(m.rings) * m.sectors;
  require(r.clutterCoeffs.size() == cells && r.clutterDoppler.size() == cells && r.noise.size() == n,
          "assemble_moving: bad realization shape");
  CVector y = r.alpha0 * s.samples().cwiseProduct(steering_vector(r.nu, n)) + r.noise;
  for (int k = 0; k < m.rings; ++k) {
    for (int l = 0; l < m.sectors; ++l) {
      const Eigen::Index c = static_cast<Eigen::Index>(k) * m.sectors + l;
      const CVector echo = s.samples().cwiseProduct(steering_vector(r.clutterDoppler(c), n));
      y += r.clutterCoeffs(c) * shift_apply(echo, k);
    }
  }
  return y;
}

}  // namespace onebit
