#pragma once

#include <cstdint>
#include <iosfwd>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "onebit/common.hpp"
#include "onebit/estimate.hpp"
#include "onebit/model.hpp"
#include "onebit/sampling.hpp"

namespace onebit {

enum class Scenario { Stationary, Moving };
enum class ThresholdPolicy { Mean, Random, Zero };

struct ExperimentConfig {
  Scenario scenario = Scenario::Stationary;
  std::vector<int> Nlist{10, 25, 50, 100};
  std::vector<double> noiseVarList{0.1};
  double beta = 0.1;
  std::optional<Complex> alphaTruth;  // unset: uniform on the annulus 0.5 <= |a| <= 1.5
  std::optional<double> nuTruth;      // unset: uniform on [-0.4, 0.4]
  int Nc = 2;
  int L = 10;
  double clutterDopplerLo = -0.1;
  double clutterDopplerHi = 0.1;
  int trials = 100;
  std::uint64_t seed = 1;
  std::vector<EstimateMethod> methods{EstimateMethod::Proposed, EstimateMethod::Bussgang,
                                      EstimateMethod::FullPrecision};
  ThresholdPolicy thresholdPolicy = ThresholdPolicy::Random;
  int K = 1;
  int pBits = 0;  // 0 disables the p-bit sampler
  SequenceKind sequence = SequenceKind::QuadraticPhase;
  std::string sequenceFile;
  // Each step draws a fresh snapshot of the same target; thresholds of later
  // steps are centred on the previous estimate.
  int trackingSteps = 1;
  std::optional<Complex> alphaPriorMean;  // unset: 0
  std::optional<double> alphaPriorPower;  // unset: 1.25 for random truth, else |truth|^2
  // Doppler prior used by threshold design in the moving scenario.
  double dopplerPriorLo = -0.4;
  double dopplerPriorHi = 0.4;
  DopplerSearchOptions dopplerSearch;
  SolverOptions solver;
  double ridgeScale = 1e-6;
  int maxCycles = 100;
  double cycleTol = 1e-6;
  BussgangOptions bussgang;
  bool recordWallTime = false;
  int threads = 0;  // 0: hardware concurrency; ONEBIT_RADAR_THREADS caps either way

  void validate() const;
};

// JSON text <-> config. Unknown keys raise InvalidArgument naming the key.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

struct TrialRecord {
  int trialId = 0;
  int N = 0;
  double noiseVar = 0.0;
  EstimateMethod method = EstimateMethod::Proposed;
  Complex alphaTruth;
  Complex alphaHat;
  double nuTruth = 0.0;
  double nuHat = 0.0;
  double normError = 0.0;
  double nuError = 0.0;
  double wallTimeMs = 0.0;
  std::string status;
  std::vector<double> objectiveHistory;  // not serialized
};

// maxIter, infeasibleInput and error records count as failures.
bool is_failure(const TrialRecord& r);

struct SummaryRow {
  int N = 0;
  double noiseVar = 0.0;
  EstimateMethod method = EstimateMethod::Proposed;
  int count = 0;
  int failures = 0;
  double normMean = 0.0, normMedian = 0.0, normP10 = 0.0, normP90 = 0.0;
  double nuMean = 0.0, nuMedian = 0.0, nuP10 = 0.0, nuP90 = 0.0;
};

struct CampaignResult {
  std::vector<TrialRecord> records;  // ordered by (N, noiseVar, trialId, method)
  std::vector<SummaryRow> summary;
};

// splitmix64 finalizer and an order-sensitive combination of words.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words);

// Random truth draws used by the campaign.
Complex draw_alpha_annulus(std::mt19937_64& rng);
double draw_nu_uniform(std::mt19937_64& rng);

// Number of workers: cfg.threads (or hardware concurrency) capped by ONEBIT_RADAR_THREADS.
int effective_threads(const ExperimentConfig& cfg);

CampaignResult run_campaign(const ExperimentConfig& cfg);

// Transmit sequence used for length n: cfg.sequenceFile when set, else the
// generated unimodular code.
TransmitSequence campaign_sequence(const ExperimentConfig& cfg, int n);

// Interference covariance R for one (sequence, noise variance) under cfg's scenario.
CMatrix interference_covariance(const ExperimentConfig& cfg, const TransmitSequence& s, double noiseVar);

// The first snapshot of one campaign trial, quantized as the proposed method sees it.
struct SimulatedTrial {
  TransmitSequence sequence;
  SceneRealization scene;
  QuantizedObservation observation;
  CMatrix covariance;
};
SimulatedTrial simulate_trial(const ExperimentConfig& cfg, int n, double noiseVar, int trial);

// Linear-interpolated percentile, q in [0, 1]; input need not be sorted.
double percentile(std::vector<double> values, double q);

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::string format_summary_table(const std::vector<SummaryRow>& rows);

// Error-vs-N and error-vs-noiseVar views (one row per (x, method)) and the
// complex-plane scatter of truths and estimates.
void write_error_vs_n_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_error_vs_noise_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_scatter_csv(std::ostream& out, const std::vector<TrialRecord>& records);

}  // namespace onebit
