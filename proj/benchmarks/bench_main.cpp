#include <benchmark/benchmark.h>

#include <random>

#include "onebit/estimate.hpp"
#include "onebit/linalg.hpp"
#include "onebit/model.hpp"
#include "onebit/qpsolve.hpp"
#include "onebit/sampling.hpp"

namespace {

using namespace onebit;

struct StationaryFixture {
  TransmitSequence seq;
  CMatrix r;
  QuantizedObservation obs;

  explicit StationaryFixture(Eigen::Index n) {
    seq = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
    r = stationary_covariance(seq, {0.1, 0.1 * CMatrix::Identity(n, n)});
    const auto scene = synthesize_stationary_scene(seq, Complex(0.5, 0.5), {0.1, 0.1 * CMatrix::Identity(n, n)}, 11);
    const auto lambdas = design_threshold_random(seq.samples(), {Complex(0, 0), 1.25}, r, 1, std::nullopt, 12);
    obs = quantize_one_bit(scene.y, lambdas.front());
  }
};

void BM_StationaryCovariance(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const auto seq = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const StationaryInterferenceModel m{0.1, 0.1 * CMatrix::Identity(n, n)};
  for (auto _ : state) benchmark::DoNotOptimize(stationary_covariance(seq, m));
}
BENCHMARK(BM_StationaryCovariance)->Arg(25)->Arg(100);

void BM_RecoveryQP(benchmark::State& state) {
  const StationaryFixture fx(state.range(0));
  const HermitianFactor f(fx.r);
  const auto qp = build_recovery_qp(fx.seq.samples(), mmf_filter(fx.seq.samples(), f).w, f, fx.obs, std::nullopt);
  SolverOptions opts;
  opts.backend = state.range(1) ? SolverBackend::ProjectedGradient : SolverBackend::ActiveSet;
  for (auto _ : state) benchmark::DoNotOptimize(solve(qp, opts));
}
BENCHMARK(BM_RecoveryQP)->Args({25, 0})->Args({100, 0})->Args({25, 1})->Args({100, 1})->Unit(benchmark::kMillisecond);

void BM_EstimateStationary(benchmark::State& state) {
  const StationaryFixture fx(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_stationary(fx.seq.samples(), HermitianFactor(fx.r), fx.obs));
}
BENCHMARK(BM_EstimateStationary)->Arg(10)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_EstimateBussgang(benchmark::State& state) {
  const StationaryFixture fx(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_bussgang(fx.seq.samples(), fx.r, fx.obs));
}
BENCHMARK(BM_EstimateBussgang)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_DopplerSearch(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const auto seq = generate_unimodular_sequence(n, SequenceKind::QuadraticPhase, 0);
  const HermitianFactor f(CMatrix::Identity(n, n));
  DopplerSpectrum spectrum(seq.samples(), f);
  spectrum.set_observation(seq.samples().cwiseProduct(steering_vector(0.123, n)));
  for (auto _ : state) benchmark::DoNotOptimize(spectrum.argmin());
}
BENCHMARK(BM_DopplerSearch)->Arg(25)->Arg(100);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
