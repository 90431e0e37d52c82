#include "onebit/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "onebit/model.hpp"

namespace onebit {

ThresholdBank ThresholdBank::single(CVector lambda) {
  ThresholdBank b;
  b.kind = BankKind::Single;
  b.vectors.push_back(std::move(lambda));
  b.validate();
  return b;
}

ThresholdBank ThresholdBank::parallel(std::vector<CVector> lambdas) {
  ThresholdBank b;
  b.kind = lambdas.size() == 1 ? BankKind::Single : BankKind::Parallel;
  b.vectors = std::move(lambdas);
  b.validate();
  return b;
}

ThresholdBank ThresholdBank::p_bit(int bits, RMatrix realLevels, RMatrix imagLevels) {
  ThresholdBank b;
  b.kind = BankKind::PBit;
  b.bits = bits;
  b.realLevels = std::move(realLevels);
  b.imagLevels = std::move(imagLevels);
  b.validate();
  return b;
}

Eigen::Index ThresholdBank::length() const {
  if (kind == BankKind::PBit) return realLevels.rows();
  return vectors.empty() ? 0 : vectors.front().size();
}

CVector ThresholdBank::mean_threshold() const {
  if (kind == BankKind::PBit) {
    CVector m(realLevels.rows());
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = Complex(realLevels.row(i).mean(), imagLevels.row(i).mean());
    return m;
  }
  CVector m = CVector::Zero(length());
  for (const auto& v : vectors) m += v;
  return m / static_cast<double>(vectors.size());
}

void ThresholdBank::validate() const {
  if (kind == BankKind::PBit) {
    require(bits >= 1 && bits <= 16, "p-bit bank: bits must be in [1, 16]");
    const Eigen::Index levels = (Eigen::Index{1} << bits) - 1;
    require(realLevels.cols() == levels && imagLevels.cols() == levels,
            "p-bit bank: expected 2^p - 1 levels per sample");
    require(realLevels.rows() == imagLevels.rows() && realLevels.rows() > 0, "p-bit bank: channel size mismatch");
    for (const RMatrix* lv : {&realLevels, &imagLevels}) {
      for (Eigen::Index i = 0; i < lv->rows(); ++i) {
        for (Eigen::Index j = 1; j < levels; ++j) {
          if (!((*lv)(i, j - 1) < (*lv)(i, j))) {
            throw InvalidArgument("p-bit bank: levels must be strictly increasing (sample " + std::to_string(i) + ")");
          }
        }
      }
    }
    return;
  }
  require(!vectors.empty(), "threshold bank: at least one threshold vector required");
  for (const auto& v : vectors) {
    require(v.size() == vectors.front().size() && v.size() > 0, "threshold bank: vectors must share a nonzero length");
  }
}

Eigen::Index QuantizedObservation::length() const { return thresholds.length(); }

CVector QuantizedObservation::gamma(std::size_t k) const {
  require(k < gammaR.size(), "QuantizedObservation::gamma: comparator index out of range");
  const double inv = 1.0 / std::sqrt(2.0);
  CVector g(gammaR[k].size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = Complex(gammaR[k](i) * inv, gammaI[k](i) * inv);
  return g;
}

Eigen::DiagonalMatrix<double, Eigen::Dynamic> QuantizedObservation::omega_r(std::size_t k) const {
  require(k < gammaR.size(), "QuantizedObservation::omega_r: comparator index out of range");
  return Eigen::DiagonalMatrix<double, Eigen::Dynamic>(gammaR[k].cast<double>());
}

Eigen::DiagonalMatrix<double, Eigen::Dynamic> QuantizedObservation::omega_i(std::size_t k) const {
  require(k < gammaI.size(), "QuantizedObservation::omega_i: comparator index out of range");
  return Eigen::DiagonalMatrix<double, Eigen::Dynamic>(gammaI[k].cast<double>());
}

namespace {

void append_signs(QuantizedObservation& obs, const CVector& y, const CVector& lambda) {
  IVector gr(y.size());
  IVector gi(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const Complex d = y(i) - lambda(i);
    gr(i) = sign_bit(d.real());
    gi(i) = sign_bit(d.imag());
  }
  obs.gammaR.push_back(std::move(gr));
  obs.gammaI.push_back(std::move(gi));
}

}  // namespace

QuantizedObservation quantize_one_bit(const CVector& y, const CVector& lambda) {
  if (y.size() != lambda.size()) {
    throw InvalidArgument("quantize_one_bit: length mismatch (y=" + std::to_string(y.size()) +
                          ", lambda=" + std::to_string(lambda.size()) + ")");
  }
  QuantizedObservation obs;
  obs.thresholds = ThresholdBank::single(lambda);
  append_signs(obs, y, lambda);
  return obs;
}

QuantizedObservation quantize_parallel(const CVector& y, const std::vector<CVector>& lambdas) {
  QuantizedObservation obs;
  obs.thresholds = ThresholdBank::parallel(lambdas);
  require(obs.thresholds.length() == y.size(), "quantize_parallel: length mismatch");
  for (const auto& l : lambdas) append_signs(obs, y, l);
  return obs;
}

int bucket_index(double value, const double* levels, int count) {
  // first level strictly greater than value; ties go to the upper bucket
  const double* it = std::upper_bound(levels, levels + count, value);
  return static_cast<int>(it - levels);
}

QuantizedObservation quantize_p_bit(const CVector& y, const ThresholdBank& bank) {
  require(bank.kind == BankKind::PBit, "quantize_p_bit: bank is not a p-bit bank");
  bank.validate();
  require(bank.length() == y.size(), "quantize_p_bit: length mismatch");
  QuantizedObservation obs;
  obs.thresholds = bank;
  const int levels = static_cast<int>(bank.realLevels.cols());
  obs.bucketR.resize(y.size());
  obs.bucketI.resize(y.size());
  // row-major copies so each sample's levels are contiguous
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> re = bank.realLevels;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> im = bank.imagLevels;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    obs.bucketR(i) = bucket_index(y(i).real(), re.row(i).data(), levels);
    obs.bucketI(i) = bucket_index(y(i).imag(), im.row(i).data(), levels);
  }
  return obs;
}

QuantizedObservation quantize(const CVector& y, const ThresholdBank& bank) {
  if (bank.kind == BankKind::PBit) return quantize_p_bit(y, bank);
  return quantize_parallel(y, bank.vectors);
}

DopplerPrior DopplerPrior::point(double nu) {
  DopplerPrior p;
  p.kind = Kind::Point;
  p.value = nu;
  return p;
}

DopplerPrior DopplerPrior::uniform(double lo, double hi) {
  require(lo <= hi, "DopplerPrior::uniform: lo must not exceed hi");
  DopplerPrior p;
  p.kind = Kind::Uniform;
  p.lo = lo;
  p.hi = hi;
  return p;
}

CVector DopplerPrior::mean_steering(Eigen::Index n) const {
  if (kind == Kind::Point) return steering_vector(value, n);
  return doppler_mean(n, 0.5 * (lo + hi), hi - lo);
}

CMatrix DopplerPrior::steering_moment(Eigen::Index n) const {
  if (kind == Kind::Point) {
    const CVector p = steering_vector(value, n);
    return p * p.adjoint();
  }
  return doppler_covariance(n, 0.5 * (lo + hi), hi - lo);
}

CVector design_threshold_mean(const CVector& s, Complex alphaPrior) { return alphaPrior * s; }

PredictedSignal predict_signal(const CVector& s, const AlphaPrior& alpha, const CMatrix& r,
                               const std::optional<DopplerPrior>& nu) {
  const Eigen::Index n = s.size();
  require(r.rows() == n && r.cols() == n, "predict_signal: covariance dimension mismatch");
  require(alpha.power >= 0.0, "predict_signal: alpha prior power must be nonnegative");
  PredictedSignal out;
  const CMatrix sst = s * s.adjoint();
  if (nu) {
    out.mean = alpha.mean * s.cwiseProduct(nu->mean_steering(n));
    out.covariance = alpha.power * sst.cwiseProduct(nu->steering_moment(n)) + r;
  } else {
    out.mean = alpha.mean * s;
    out.covariance = alpha.power * sst + r;
  }
  return out;
}

std::vector<CVector> design_threshold_random(const CVector& s, const AlphaPrior& alpha, const CMatrix& r, int k,
                                             const std::optional<DopplerPrior>& nu, std::mt19937_64& rng) {
  require(k >= 1, "design_threshold_random: K must be >= 1");
  const PredictedSignal pred = predict_signal(s, alpha, r, nu);
  const ComplexGaussianSampler sampler(pred.covariance);
  std::vector<CVector> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(pred.mean + sampler.draw(rng));
  return out;
}

std::vector<CVector> design_threshold_random(const CVector& s, const AlphaPrior& alpha, const CMatrix& r, int k,
                                             const std::optional<DopplerPrior>& nu, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return design_threshold_random(s, alpha, r, k, nu, rng);
}

ThresholdBank default_p_bit_levels(int bits, const PredictedSignal& predicted) {
  require(bits >= 1 && bits <= 16, "default_p_bit_levels: bits must be in [1, 16]");
  const Eigen::Index n = predicted.mean.size();
  const int count = (1 << bits) - 1;
  RMatrix re(n, count);
  RMatrix im(n, count);
  for (Eigen::Index i = 0; i < n; ++i) {
    // per-channel variance of a circular complex Gaussian is half the total
    const double sd = std::max(std::sqrt(std::max(predicted.covariance(i, i).real(), 0.0) / 2.0), 1e-9);
    for (int j = 1; j <= count; ++j) {
      const double offset = -3.0 * sd + 6.0 * sd * static_cast<double>(j) / static_cast<double>(count + 1);
      re(i, j - 1) = predicted.mean(i).real() + offset;
      im(i, j - 1) = predicted.mean(i).imag() + offset;
    }
  }
  return ThresholdBank::p_bit(bits, std::move(re), std::move(im));
}

}  // namespace onebit
