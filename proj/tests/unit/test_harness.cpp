#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "onebit/harness.hpp"

using namespace onebit;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.Nlist = {8, 12};
  cfg.noiseVarList = {0.1};
  cfg.trials = 4;
  cfg.threads = 1;
  return cfg;
}

TrialRecord record(int n, EstimateMethod m, double err, std::string status = "optimal") {
  TrialRecord r;
  r.N = n;
  r.noiseVar = 0.1;
  r.method = m;
  r.normError = err;
  r.nuError = 0.0;
  r.status = std::move(status);
  return r;
}

}  // namespace

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({3.0, 1.0, 2.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(percentile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(percentile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.9), 4.6);
  EXPECT_DOUBLE_EQ(percentile({7.0}, 0.3), 7.0);
  EXPECT_THROW(percentile({}, 0.5), InvalidArgument);
  EXPECT_THROW(percentile({1.0}, 1.5), InvalidArgument);
}

TEST(Summarize, GroupsAndStatistics) {
  std::vector<TrialRecord> recs;
  for (int i = 1; i <= 5; ++i) recs.push_back(record(10, EstimateMethod::Proposed, 0.1 * i));
  recs.push_back(record(10, EstimateMethod::Bussgang, 0.5));
  recs.push_back(record(10, EstimateMethod::Bussgang, 1.5));
  recs.push_back(record(20, EstimateMethod::Proposed, 0.2));
  const auto rows = summarize(recs);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].count, 5);
  EXPECT_NEAR(rows[0].normMean, 0.3, 1e-15);
  EXPECT_NEAR(rows[0].normMedian, 0.3, 1e-15);
  EXPECT_NEAR(rows[0].normP10, 0.14, 1e-15);
  EXPECT_NEAR(rows[0].normP90, 0.46, 1e-15);
  EXPECT_EQ(rows[1].method, EstimateMethod::Bussgang);
  EXPECT_DOUBLE_EQ(rows[1].normMedian, 1.0);
  EXPECT_EQ(rows[2].N, 20);
}

TEST(Summarize, FailuresExcluded) {
  std::vector<TrialRecord> recs{record(10, EstimateMethod::Proposed, 0.2),
                                record(10, EstimateMethod::Proposed, 100.0, "maxIter"),
                                record(10, EstimateMethod::Proposed, 100.0, "error"),
                                record(10, EstimateMethod::Proposed, 0.4, "maxCycles")};
  const auto rows = summarize(recs);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].count, 4);
  EXPECT_EQ(rows[0].failures, 2);
  EXPECT_NEAR(rows[0].normMean, 0.3, 1e-15);
  EXPECT_TRUE(is_failure(record(1, EstimateMethod::Proposed, 0, "infeasibleInput")));
  EXPECT_FALSE(is_failure(record(1, EstimateMethod::Proposed, 0, "ok")));
}

TEST(Summarize, EmptyInputRejected) { EXPECT_THROW(summarize({}), InvalidArgument); }

TEST(Seeds, MixingIsOrderSensitiveAndStable) {
  EXPECT_EQ(mix_seed({1, 2, 3}), mix_seed({1, 2, 3}));
  EXPECT_NE(mix_seed({1, 2, 3}), mix_seed({3, 2, 1}));
  EXPECT_NE(mix_seed({1, 2}), mix_seed({1, 2, 0}));
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Truth, AnnulusDrawsStayInRange) {
  std::mt19937_64 rng(5);
  double inner = 0.0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const double r = std::abs(draw_alpha_annulus(rng));
    EXPECT_GE(r, 0.5 - 1e-15);
    EXPECT_LE(r, 1.5 + 1e-15);
    if (r < 1.0) inner += 1.0;
  }
  // area fraction of 0.5 <= r < 1 is (1 - 0.25) / (2.25 - 0.25)
  EXPECT_NEAR(inner / draws, 0.375, 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double nu = draw_nu_uniform(rng);
    EXPECT_GE(nu, -0.4);
    EXPECT_LE(nu, 0.4);
  }
}

TEST(Campaign, FullPrecisionExactWithoutInterference) {
  auto cfg = small_config();
  cfg.beta = 0.0;
  cfg.noiseVarList = {0.0};
  cfg.methods = {EstimateMethod::FullPrecision};
  const auto res = run_campaign(cfg);
  ASSERT_EQ(res.records.size(), 8u);
  for (const auto& r : res.records) EXPECT_LE(r.normError, 1e-9);
}

TEST(Campaign, RowCountsAndOrdering) {
  auto cfg = small_config();
  cfg.noiseVarList = {0.01, 0.1};
  const auto res = run_campaign(cfg);
  EXPECT_EQ(res.records.size(), 2u * 2u * 4u * 3u);
  EXPECT_EQ(res.summary.size(), 2u * 2u * 3u);
  for (const auto& row : res.summary) EXPECT_EQ(row.count, 4);
  EXPECT_EQ(res.records[0].N, 8);
  EXPECT_EQ(res.records[0].trialId, 0);
  EXPECT_EQ(res.records[0].method, EstimateMethod::Proposed);
  EXPECT_EQ(res.records[1].method, EstimateMethod::Bussgang);
  EXPECT_EQ(res.records[3].trialId, 1);
  for (const auto& r : res.records) EXPECT_EQ(r.wallTimeMs, 0.0);
}

TEST(Campaign, IndependentOfThreadCount) {
  auto cfg = small_config();
  cfg.scenario = Scenario::Moving;
  cfg.trials = 3;
  cfg.methods = {EstimateMethod::Proposed, EstimateMethod::FullPrecision};
  std::ostringstream a, b;
  write_trials_csv(a, run_campaign(cfg).records);
  cfg.threads = 3;
  write_trials_csv(b, run_campaign(cfg).records);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Campaign, MethodsShareTruthAndScene) {
  auto cfg = small_config();
  cfg.trials = 2;
  const auto all = run_campaign(cfg);
  cfg.methods = {EstimateMethod::FullPrecision};
  const auto fp = run_campaign(cfg);
  for (const auto& r : fp.records) {
    bool found = false;
    for (const auto& q : all.records) {
      if (q.method == EstimateMethod::FullPrecision && q.N == r.N && q.trialId == r.trialId) {
        EXPECT_EQ(q.alphaHat, r.alphaHat);
        EXPECT_EQ(q.alphaTruth, r.alphaTruth);
        found = true;
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST(Campaign, TrackingStepsRun) {
  auto cfg = small_config();
  cfg.trackingSteps = 3;
  cfg.trials = 2;
  const auto res = run_campaign(cfg);
  for (const auto& r : res.records) EXPECT_FALSE(is_failure(r)) << r.status;
}

TEST(Campaign, PBitAndParallelVariantsRun) {
  auto cfg = small_config();
  cfg.methods = {EstimateMethod::Proposed};
  cfg.pBits = 2;
  for (const auto& r : run_campaign(cfg).records) EXPECT_FALSE(is_failure(r)) << r.status;
  cfg.pBits = 0;
  cfg.K = 3;
  for (const auto& r : run_campaign(cfg).records) EXPECT_FALSE(is_failure(r)) << r.status;
}

TEST(Campaign, NoiseIndependentAcrossTrials) {
  ExperimentConfig cfg;
  cfg.Nlist = {25};
  cfg.beta = 0.0;
  const int trials = 400;
  std::vector<CVector> noise;
  for (int t = 0; t < trials; ++t) noise.push_back(simulate_trial(cfg, 25, 0.1, t).scene.noise);
  Complex cross(0, 0);
  double power = 0.0;
  for (int t = 0; t + 1 < trials; ++t) {
    cross += noise[t + 1].dot(noise[t]);
    power += noise[t].squaredNorm();
  }
  EXPECT_LT(std::abs(cross) / power, 0.05);
}

TEST(Campaign, SimulatedTrialIsDeterministic) {
  ExperimentConfig cfg;
  const auto a = simulate_trial(cfg, 10, 0.1, 3);
  const auto b = simulate_trial(cfg, 10, 0.1, 3);
  EXPECT_TRUE(a.scene.y == b.scene.y);
  EXPECT_TRUE(a.observation.gammaR[0] == b.observation.gammaR[0]);
  EXPECT_FALSE(a.scene.y == simulate_trial(cfg, 10, 0.1, 4).scene.y);
  EXPECT_LT((a.covariance - interference_covariance(cfg, a.sequence, 0.1)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Config, DefaultsAndRoundTrip) {
  const auto cfg = config_from_json("{}");
  EXPECT_EQ(cfg.Nlist, (std::vector<int>{10, 25, 50, 100}));
  EXPECT_EQ(cfg.trials, 100);
  const std::string text = config_to_json(cfg);
  EXPECT_EQ(config_to_json(config_from_json(text)), text);

  const auto custom = config_from_json(
      R"({"scenario":"moving","Nlist":[16],"alphaTruth":[0.5,-0.25],"nuTruth":0.1,"methods":["proposed"],)"
      R"("thresholdPolicy":"mean","solver":{"backend":"projectedGradient"},"cycles":{"max":7},)"
      R"("alphaPrior":{"mean":[0.1,0.2],"power":2.0},"bussgang":{"gridSize":51}})");
  EXPECT_EQ(custom.scenario, Scenario::Moving);
  EXPECT_EQ(*custom.alphaTruth, Complex(0.5, -0.25));
  EXPECT_EQ(custom.maxCycles, 7);
  EXPECT_EQ(custom.solver.backend, SolverBackend::ProjectedGradient);
  EXPECT_EQ(custom.bussgang.gridSize, 51);
  const std::string customText = config_to_json(custom);
  EXPECT_EQ(config_to_json(config_from_json(customText)), customText);
}

TEST(Config, UnknownKeysNamed) {
  try {
    config_from_json(R"({"trails": 5})");
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("trails"), std::string::npos);
  }
  try {
    config_from_json(R"({"solver": {"tolerance": 1e-6}})");
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("solver.tolerance"), std::string::npos);
  }
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(config_from_json(R"({"trials": 0})"), InvalidArgument);
  EXPECT_THROW(config_from_json(R"({"Nlist": "ten"})"), InvalidArgument);
  EXPECT_THROW(config_from_json(R"({"methods": ["mle"]})"), InvalidArgument);
  EXPECT_THROW(config_from_json(R"({"pBits": 2, "methods": ["bussgang"]})"), InvalidArgument);
  EXPECT_THROW(config_from_json(R"({"scenario": "moving", "Nlist": [4], "Nc": 5})"), InvalidArgument);
  EXPECT_THROW(config_from_json("{not json"), InvalidArgument);
}

TEST(Output, TrialsCsvHeaderAndRow) {
  TrialRecord r = record(10, EstimateMethod::Proposed, 0.25);
  r.alphaTruth = Complex(1.0, 0.0);
  r.alphaHat = Complex(0.75, 0.0);
  std::ostringstream out;
  write_trials_csv(out, {r});
  EXPECT_EQ(out.str(),
            "trialId,N,noiseVar,method,alphaTruthRe,alphaTruthIm,alphaHatRe,alphaHatIm,nuTruth,nuHat,normError,"
            "nuError,wallTimeMs,status\n"
            "0,10,0.10000000000000001,proposed,1,0,0.75,0,0,0,0.25,0,0,optimal\n");
}

TEST(Output, ViewsHaveOneRowPerPointAndMethod) {
  auto cfg = small_config();
  cfg.noiseVarList = {0.01, 0.1, 1.0};
  cfg.trials = 2;
  const auto res = run_campaign(cfg);
  std::ostringstream byN, byNoise, scatter;
  write_error_vs_n_csv(byN, res.summary);
  write_error_vs_noise_csv(byNoise, res.summary);
  write_scatter_csv(scatter, res.records);
  const auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  EXPECT_EQ(lines(byN.str()), 1 + 2 * 3 * 3);
  EXPECT_EQ(lines(byNoise.str()), 1 + 2 * 3 * 3);
  EXPECT_EQ(byN.str().substr(0, byN.str().find('\n')),
            "method,N,noiseVar,normErrorMedian,normErrorMean,normErrorP10,normErrorP90,nuErrorMedian,nuErrorMean");
  // one truth row per trial plus one row per record
  EXPECT_EQ(lines(scatter.str()), 1 + 2 * 3 * 2 + static_cast<long>(res.records.size()));
}
