#include "onebit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "onebit/io.hpp"
#include "onebit/linalg.hpp"
#include "onebit/sampling.hpp"

namespace onebit {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string scenario_name(Scenario s) { return s == Scenario::Stationary ? "stationary" : "moving"; }

Scenario scenario_from(const std::string& s) {
  if (s == "stationary") return Scenario::Stationary;
  if (s == "moving") return Scenario::Moving;
  throw InvalidArgument("scenario must be 'stationary' or 'moving', got '" + s + "'");
}

std::string policy_name(ThresholdPolicy p) {
  switch (p) {
    case ThresholdPolicy::Mean: return "mean";
    case ThresholdPolicy::Random: return "random";
    case ThresholdPolicy::Zero: return "zero";
  }
  return "unknown";
}

ThresholdPolicy policy_from(const std::string& s) {
  if (s == "mean") return ThresholdPolicy::Mean;
  if (s == "random") return ThresholdPolicy::Random;
  if (s == "zero") return ThresholdPolicy::Zero;
  throw InvalidArgument("thresholdPolicy must be 'mean', 'random' or 'zero', got '" + s + "'");
}

std::string sequence_name(SequenceKind k) { return k == SequenceKind::QuadraticPhase ? "quadraticPhase" : "randomPhase"; }

SequenceKind sequence_from(const std::string& s) {
  if (s == "quadraticPhase") return SequenceKind::QuadraticPhase;
  if (s == "randomPhase") return SequenceKind::RandomPhase;
  throw InvalidArgument("sequence must be 'quadraticPhase' or 'randomPhase', got '" + s + "'");
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
  if (!obj.is_object()) throw InvalidArgument("config: '" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw InvalidArgument("config: unknown key '" + prefix + item.key() + "'");
  }
}

Complex complex_from(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw InvalidArgument("config: '" + key + "' must be a two-element [re, im] array");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
T get_as(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument("config: '" + key + "' has the wrong type");
  }
}

Json complex_json(Complex c) { return Json::array({c.real(), c.imag()}); }

double wrapped_distance(double a, double b) {
  const double d = std::abs(wrap_doppler(a - b));
  return std::min(d, 1.0 - d);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!Nlist.empty(), "config: Nlist must not be empty");
  for (const int n : Nlist) require(n >= 2, "config: every N must be >= 2");
  require(!noiseVarList.empty(), "config: noiseVarList must not be empty");
  for (const double v : noiseVarList) require(v >= 0.0 && std::isfinite(v), "config: noise variances must be finite and >= 0");
  require(beta >= 0.0, "config: beta must be >= 0");
  require(trials >= 1, "config: trials must be >= 1");
  require(!methods.empty(), "config: methods must not be empty");
  require(K >= 1, "config: K must be >= 1");
  require(pBits >= 0 && pBits <= 16, "config: pBits must be in [0, 16]");
  require(trackingSteps >= 1, "config: trackingSteps must be >= 1");
  require(ridgeScale >= 0.0, "config: ridgeScale must be >= 0");
  require(maxCycles >= 1, "config: cycles.max must be >= 1");
  require(cycleTol >= 0.0, "config: cycles.tol must be >= 0");
  require(solver.tol > 0.0, "config: solver.tol must be > 0");
  require(threads >= 0, "config: threads must be >= 0");
  require(dopplerPriorLo <= dopplerPriorHi, "config: doppler.priorInterval must be ordered");
  require(dopplerSearch.gridPoints >= 2 && dopplerSearch.refineWidth > 0.0, "config: invalid doppler search settings");
  if (alphaPriorPower) require(*alphaPriorPower >= 0.0, "config: alphaPrior.power must be >= 0");
  if (nuTruth) require(*nuTruth >= -0.5 && *nuTruth < 0.5, "config: nuTruth must lie in [-0.5, 0.5)");
  if (scenario == Scenario::Moving) {
    require(Nc >= 1 && L >= 1, "config: Nc and L must be >= 1");
    for (const int n : Nlist) require(Nc <= n, "config: Nc must not exceed any N");
    require(clutterDopplerLo <= clutterDopplerHi, "config: clutterDopplerInterval must be ordered");
  }
  for (const auto m : methods) {
    if (m == EstimateMethod::Bussgang) require(pBits == 0, "config: the bussgang method needs one-bit observations");
  }
}

ExperimentConfig config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("config: JSON parse error: ") + e.what());
  }
  check_keys(j,
             {"scenario", "Nlist", "noiseVarList", "beta", "alphaTruth", "nuTruth", "Nc", "L",
              "clutterDopplerInterval", "trials", "seed", "methods", "thresholdPolicy", "K", "pBits", "sequence",
              "sequenceFile", "trackingSteps", "alphaPrior", "doppler", "solver", "ridgeScale", "cycles", "bussgang",
              "recordWallTime", "threads"},
             "");
  ExperimentConfig c;
  if (j.contains("scenario")) c.scenario = scenario_from(get_as<std::string>(j["scenario"], "scenario"));
  if (j.contains("Nlist")) c.Nlist = get_as<std::vector<int>>(j["Nlist"], "Nlist");
  if (j.contains("noiseVarList")) c.noiseVarList = get_as<std::vector<double>>(j["noiseVarList"], "noiseVarList");
  if (j.contains("beta")) c.beta = get_as<double>(j["beta"], "beta");
  if (j.contains("alphaTruth")) {
    const Json& a = j["alphaTruth"];
    if (a.is_string() && a.get<std::string>() == "random") c.alphaTruth.reset();
    else c.alphaTruth = complex_from(a, "alphaTruth");
  }
  if (j.contains("nuTruth")) {
    const Json& a = j["nuTruth"];
    if (a.is_string() && a.get<std::string>() == "random") c.nuTruth.reset();
    else c.nuTruth = get_as<double>(a, "nuTruth");
  }
  if (j.contains("Nc")) c.Nc = get_as<int>(j["Nc"], "Nc");
  if (j.contains("L")) c.L = get_as<int>(j["L"], "L");
  if (j.contains("clutterDopplerInterval")) {
    const auto v = get_as<std::vector<double>>(j["clutterDopplerInterval"], "clutterDopplerInterval");
    require(v.size() == 2, "config: clutterDopplerInterval must be [lo, hi]");
    c.clutterDopplerLo = v[0];
    c.clutterDopplerHi = v[1];
  }
  if (j.contains("trials")) c.trials = get_as<int>(j["trials"], "trials");
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : get_as<std::vector<std::string>>(j["methods"], "methods")) {
      c.methods.push_back(estimate_method_from_string(m));
    }
  }
  if (j.contains("thresholdPolicy")) c.thresholdPolicy = policy_from(get_as<std::string>(j["thresholdPolicy"], "thresholdPolicy"));
  if (j.contains("K")) c.K = get_as<int>(j["K"], "K");
  if (j.contains("pBits")) c.pBits = get_as<int>(j["pBits"], "pBits");
  if (j.contains("sequence")) c.sequence = sequence_from(get_as<std::string>(j["sequence"], "sequence"));
  if (j.contains("sequenceFile")) c.sequenceFile = get_as<std::string>(j["sequenceFile"], "sequenceFile");
  if (j.contains("trackingSteps")) c.trackingSteps = get_as<int>(j["trackingSteps"], "trackingSteps");
  if (j.contains("alphaPrior")) {
    const Json& p = j["alphaPrior"];
    check_keys(p, {"mean", "power"}, "alphaPrior.");
    if (p.contains("mean")) {
      if (p["mean"].is_string() && p["mean"].get<std::string>() == "auto") c.alphaPriorMean.reset();
      else c.alphaPriorMean = complex_from(p["mean"], "alphaPrior.mean");
    }
    if (p.contains("power")) {
      if (p["power"].is_string() && p["power"].get<std::string>() == "auto") c.alphaPriorPower.reset();
      else c.alphaPriorPower = get_as<double>(p["power"], "alphaPrior.power");
    }
  }
  if (j.contains("doppler")) {
    const Json& d = j["doppler"];
    check_keys(d, {"priorInterval", "gridPoints", "refineWidth"}, "doppler.");
    if (d.contains("priorInterval")) {
      const auto v = get_as<std::vector<double>>(d["priorInterval"], "doppler.priorInterval");
      require(v.size() == 2, "config: doppler.priorInterval must be [lo, hi]");
      c.dopplerPriorLo = v[0];
      c.dopplerPriorHi = v[1];
    }
    if (d.contains("gridPoints")) c.dopplerSearch.gridPoints = get_as<int>(d["gridPoints"], "doppler.gridPoints");
    if (d.contains("refineWidth")) c.dopplerSearch.refineWidth = get_as<double>(d["refineWidth"], "doppler.refineWidth");
  }
  if (j.contains("solver")) {
    const Json& s = j["solver"];
    check_keys(s, {"backend", "tol", "maxIter", "autoSwitchN"}, "solver.");
    if (s.contains("backend")) c.solver.backend = solver_backend_from_string(get_as<std::string>(s["backend"], "solver.backend"));
    if (s.contains("tol")) c.solver.tol = get_as<double>(s["tol"], "solver.tol");
    if (s.contains("maxIter")) c.solver.maxIter = get_as<int>(s["maxIter"], "solver.maxIter");
    if (s.contains("autoSwitchN")) c.solver.autoSwitchN = get_as<int>(s["autoSwitchN"], "solver.autoSwitchN");
  }
  if (j.contains("ridgeScale")) c.ridgeScale = get_as<double>(j["ridgeScale"], "ridgeScale");
  if (j.contains("cycles")) {
    const Json& cy = j["cycles"];
    check_keys(cy, {"max", "tol"}, "cycles.");
    if (cy.contains("max")) c.maxCycles = get_as<int>(cy["max"], "cycles.max");
    if (cy.contains("tol")) c.cycleTol = get_as<double>(cy["tol"], "cycles.tol");
  }
  if (j.contains("bussgang")) {
    const Json& b = j["bussgang"];
    check_keys(b, {"gridSize", "radius", "dopplerGrid", "movingGridSize", "polishIterations"}, "bussgang.");
    if (b.contains("gridSize")) c.bussgang.gridSize = get_as<int>(b["gridSize"], "bussgang.gridSize");
    if (b.contains("radius")) c.bussgang.radius = get_as<double>(b["radius"], "bussgang.radius");
    if (b.contains("dopplerGrid")) c.bussgang.dopplerGrid = get_as<int>(b["dopplerGrid"], "bussgang.dopplerGrid");
    if (b.contains("movingGridSize")) c.bussgang.movingGridSize = get_as<int>(b["movingGridSize"], "bussgang.movingGridSize");
    if (b.contains("polishIterations")) c.bussgang.polishIterations = get_as<int>(b["polishIterations"], "bussgang.polishIterations");
  }
  if (j.contains("recordWallTime")) c.recordWallTime = get_as<bool>(j["recordWallTime"], "recordWallTime");
  if (j.contains("threads")) c.threads = get_as<int>(j["threads"], "threads");
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  Json j;
  j["scenario"] = scenario_name(c.scenario);
  j["Nlist"] = c.Nlist;
  j["noiseVarList"] = c.noiseVarList;
  j["beta"] = c.beta;
  j["alphaTruth"] = c.alphaTruth ? complex_json(*c.alphaTruth) : Json("random");
  j["nuTruth"] = c.nuTruth ? Json(*c.nuTruth) : Json("random");
  j["Nc"] = c.Nc;
  j["L"] = c.L;
  j["clutterDopplerInterval"] = {c.clutterDopplerLo, c.clutterDopplerHi};
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  Json methods = Json::array();
  for (const auto m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["thresholdPolicy"] = policy_name(c.thresholdPolicy);
  j["K"] = c.K;
  j["pBits"] = c.pBits;
  j["sequence"] = sequence_name(c.sequence);
  j["sequenceFile"] = c.sequenceFile;
  j["trackingSteps"] = c.trackingSteps;
  j["alphaPrior"]["mean"] = c.alphaPriorMean ? complex_json(*c.alphaPriorMean) : Json("auto");
  j["alphaPrior"]["power"] = c.alphaPriorPower ? Json(*c.alphaPriorPower) : Json("auto");
  j["doppler"]["priorInterval"] = {c.dopplerPriorLo, c.dopplerPriorHi};
  j["doppler"]["gridPoints"] = c.dopplerSearch.gridPoints;
  j["doppler"]["refineWidth"] = c.dopplerSearch.refineWidth;
  j["solver"]["backend"] = to_string(c.solver.backend);
  j["solver"]["tol"] = c.solver.tol;
  j["solver"]["maxIter"] = c.solver.maxIter;
  j["solver"]["autoSwitchN"] = c.solver.autoSwitchN;
  j["ridgeScale"] = c.ridgeScale;
  j["cycles"]["max"] = c.maxCycles;
  j["cycles"]["tol"] = c.cycleTol;
  j["bussgang"]["gridSize"] = c.bussgang.gridSize;
  j["bussgang"]["radius"] = c.bussgang.radius;
  j["bussgang"]["dopplerGrid"] = c.bussgang.dopplerGrid;
  j["bussgang"]["movingGridSize"] = c.bussgang.movingGridSize;
  j["bussgang"]["polishIterations"] = c.bussgang.polishIterations;
  j["recordWallTime"] = c.recordWallTime;
  j["threads"] = c.threads;
  return j.dump(2);
}

bool is_failure(const TrialRecord& r) {
  return r.status == "maxIter" || r.status == "infeasibleInput" || r.status == "error";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (const auto w : words) h = splitmix64(h ^ splitmix64(w));
  return h;
}

Complex draw_alpha_annulus(std::mt19937_64& rng) {
  // area-uniform on 0.5 <= |a| <= 1.5
  std::uniform_real_distribution<double> r2(0.25, 2.25);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const double radius = std::sqrt(r2(rng));
  return std::polar(radius, phase(rng));
}

double draw_nu_uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  return u(rng);
}

int effective_threads(const ExperimentConfig& cfg) {
  int n = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("ONEBIT_RADAR_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min(n, static_cast<int>(cap));
  }
  return std::max(n, 1);
}

namespace {

constexpr std::uint64_t kTagTruth = 0x7472757468ULL;
constexpr std::uint64_t kTagScene = 0x7363656e65ULL;
constexpr std::uint64_t kTagSequence = 0x736571ULL;

// Everything about one (N, noiseVar) cell that is shared by its trials.
struct Cell {
  int N = 0;
  double noiseVar = 0.0;
  CVector s;
  TransmitSequence sequence;
  CMatrix R;
  std::unique_ptr<HermitianFactor> factor;
  StationaryInterferenceModel stationary;
  MovingClutterModel moving;
  AlphaPrior prior;
  PredictedSignal predicted;  // first snapshot
  std::unique_ptr<ComplexGaussianSampler> priorSampler;
  std::unique_ptr<ComplexGaussianSampler> trackSampler;
};

std::uint64_t double_bits(double v) { return std::bit_cast<std::uint64_t>(v); }

StationaryInterferenceModel stationary_model(const ExperimentConfig& cfg, int n, double noiseVar) {
  return StationaryInterferenceModel{cfg.beta, noiseVar * CMatrix::Identity(n, n)};
}

// Per-cell power beta / L keeps each ring's total clutter power at beta.
MovingClutterModel moving_model(const ExperimentConfig& cfg, int n, double noiseVar) {
  const double center = 0.5 * (cfg.clutterDopplerLo + cfg.clutterDopplerHi);
  const double width = cfg.clutterDopplerHi - cfg.clutterDopplerLo;
  return MovingClutterModel::uniform(cfg.Nc, cfg.L, cfg.beta / cfg.L, center, width,
                                     noiseVar * CMatrix::Identity(n, n));
}

std::unique_ptr<Cell> build_cell(const ExperimentConfig& cfg, int n, double noiseVar,
                                 const std::optional<TransmitSequence>& fileSequence) {
  auto cell = std::make_unique<Cell>();
  cell->N = n;
  cell->noiseVar = noiseVar;
  if (fileSequence) {
    require(fileSequence->length() == n, "config: sequenceFile length does not match N=" + std::to_string(n));
    cell->sequence = *fileSequence;
  } else {
    cell->sequence = generate_unimodular_sequence(n, cfg.sequence, mix_seed({cfg.seed, kTagSequence, std::uint64_t(n)}));
  }
  cell->s = cell->sequence.samples();
  std::optional<DopplerPrior> dopplerPrior;
  if (cfg.scenario == Scenario::Stationary) {
    cell->stationary = stationary_model(cfg, n, noiseVar);
    cell->R = stationary_covariance(cell->sequence, cell->stationary);
  } else {
    cell->moving = moving_model(cfg, n, noiseVar);
    cell->R = total_covariance_moving(moving_clutter_covariance(cell->sequence, cell->moving), cell->moving.gamma);
    dopplerPrior = DopplerPrior::uniform(cfg.dopplerPriorLo, cfg.dopplerPriorHi);
  }
  cell->factor = std::make_unique<HermitianFactor>(cell->R);
  cell->prior.mean = cfg.alphaPriorMean.value_or(Complex(0.0, 0.0));
  cell->prior.power = cfg.alphaPriorPower.value_or(cfg.alphaTruth ? std::norm(*cfg.alphaTruth) : 1.25);
  cell->predicted = predict_signal(cell->s, cell->prior, cell->R, dopplerPrior);
  const bool needsSampler = cfg.thresholdPolicy == ThresholdPolicy::Random && cfg.pBits == 0;
  if (needsSampler) {
    cell->priorSampler = std::make_unique<ComplexGaussianSampler>(cell->predicted.covariance);
    if (cfg.trackingSteps > 1) cell->trackSampler = std::make_unique<ComplexGaussianSampler>(cell->R);
  }
  return cell;
}

// Threshold bank for one snapshot. `previous` carries the last estimate when tracking.
ThresholdBank design_bank(const ExperimentConfig& cfg, const Cell& cell, const std::optional<TargetEstimate>& previous,
                          std::mt19937_64& rng) {
  PredictedSignal pred;
  const ComplexGaussianSampler* sampler = cell.priorSampler.get();
  if (previous) {
    const bool moving = cfg.scenario == Scenario::Moving;
    pred.mean = previous->alphaHat * (moving ? CVector(cell.s.cwiseProduct(steering_vector(previous->nuHat, cell.N))) : cell.s);
    pred.covariance = cell.R;
    sampler = cell.trackSampler.get();
  } else {
    pred = cell.predicted;
  }
  if (cfg.pBits > 0) return default_p_bit_levels(cfg.pBits, pred);
  std::vector<CVector> lambdas;
  for (int k = 0; k < cfg.K; ++k) {
    switch (cfg.thresholdPolicy) {
      case ThresholdPolicy::Zero: lambdas.push_back(CVector::Zero(cell.N)); break;
      case ThresholdPolicy::Mean: lambdas.push_back(pred.mean); break;
      case ThresholdPolicy::Random: lambdas.push_back(pred.mean + sampler->draw(rng)); break;
    }
  }
  return ThresholdBank::parallel(std::move(lambdas));
}

TargetEstimate run_method(const ExperimentConfig& cfg, const Cell& cell, EstimateMethod method,
                          const QuantizedObservation& obs, const CVector& y,
                          const std::optional<TargetEstimate>& previous) {
  const bool moving = cfg.scenario == Scenario::Moving;
  RecoveryOptions recovery;
  recovery.ridgeScale = cfg.ridgeScale;
  switch (method) {
    case EstimateMethod::FullPrecision:
      return estimate_full_precision(cell.s, *cell.factor, y, std::nullopt, moving, cfg.dopplerSearch);
    case EstimateMethod::Proposed: {
      if (!moving) return estimate_stationary(cell.s, *cell.factor, obs, StationaryOptions{cfg.solver, recovery});
      MovingOptions opts;
      opts.solver = cfg.solver;
      opts.recovery = recovery;
      opts.search = cfg.dopplerSearch;
      opts.maxCycles = cfg.maxCycles;
      opts.tol = cfg.cycleTol;
      opts.alphaPriorPower = previous ? std::norm(previous->alphaHat) : cell.prior.power;
      if (previous) opts.initialNu = previous->nuHat;
      return estimate_moving(cell.s, *cell.factor, obs, opts);
    }
    case EstimateMethod::Bussgang: {
      BussgangOptions opts = cfg.bussgang;
      opts.alphaPrior = previous ? previous->alphaHat : cell.prior.mean;
      if (moving && previous) return estimate_bussgang(cell.s, cell.R, obs, previous->nuHat, false, opts);
      return estimate_bussgang(cell.s, cell.R, obs, std::nullopt, moving, opts);
    }
  }
  throw InvalidArgument("unknown method");
}

struct TrialScenes {
  Complex alpha0;
  double nu0 = 0.0;
  std::vector<SceneRealization> scenes;
  std::vector<std::uint64_t> sceneSeeds;
};

TrialScenes draw_trial_scenes(const ExperimentConfig& cfg, const Cell& cell, int trial) {
  const bool moving = cfg.scenario == Scenario::Moving;
  const std::uint64_t cellKey = mix_seed({cfg.seed, std::uint64_t(cell.N), double_bits(cell.noiseVar), std::uint64_t(trial)});
  std::mt19937_64 truthRng(mix_seed({cellKey, kTagTruth}));
  TrialScenes t;
  t.alpha0 = cfg.alphaTruth ? *cfg.alphaTruth : draw_alpha_annulus(truthRng);
  t.nu0 = moving ? (cfg.nuTruth ? *cfg.nuTruth : draw_nu_uniform(truthRng)) : 0.0;
  for (int step = 0; step < cfg.trackingSteps; ++step) {
    const std::uint64_t sceneSeed = mix_seed({cellKey, kTagScene, std::uint64_t(step)});
    t.sceneSeeds.push_back(sceneSeed);
    t.scenes.push_back(moving ? synthesize_moving_scene(cell.sequence, t.alpha0, t.nu0, cell.moving, sceneSeed)
                              : synthesize_stationary_scene(cell.sequence, t.alpha0, cell.stationary, sceneSeed));
  }
  return t;
}

std::mt19937_64 method_stream(std::uint64_t sceneSeed, EstimateMethod method) {
  return std::mt19937_64(mix_seed({sceneSeed, static_cast<std::uint64_t>(method) + 1}));
}

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const Cell& cell, int trial) {
  const TrialScenes drawn = draw_trial_scenes(cfg, cell, trial);
  const Complex alpha0 = drawn.alpha0;
  const double nu0 = drawn.nu0;
  const auto& scenes = drawn.scenes;
  const auto& sceneSeeds = drawn.sceneSeeds;

  std::vector<TrialRecord> out;
  for (const auto method : cfg.methods) {
    TrialRecord rec;
    rec.trialId = trial;
    rec.N = cell.N;
    rec.noiseVar = cell.noiseVar;
    rec.method = method;
    rec.alphaTruth = alpha0;
    rec.nuTruth = nu0;
    const auto start = std::chrono::steady_clock::now();
    try {
      std::optional<TargetEstimate> est;
      const int steps = method == EstimateMethod::FullPrecision ? 1 : cfg.trackingSteps;
      const int first = cfg.trackingSteps - steps;
      for (int step = first; step < cfg.trackingSteps; ++step) {
        std::mt19937_64 methodRng = method_stream(sceneSeeds[std::size_t(step)], method);
        const CVector& y = scenes[std::size_t(step)].y;
        QuantizedObservation obs;
        if (method != EstimateMethod::FullPrecision) obs = quantize(y, design_bank(cfg, cell, est, methodRng));
        TargetEstimate next = run_method(cfg, cell, method, obs, y, est);
        est = std::move(next);
        if (est->solverStatus == "maxIter" || est->solverStatus == "infeasibleInput") break;
      }
      rec.alphaHat = est->alphaHat;
      rec.nuHat = est->nuHat;
      rec.status = est->solverStatus;
      rec.objectiveHistory = est->objectiveHistory;
      rec.normError = std::abs(alpha0 - rec.alphaHat) / std::abs(alpha0);
      rec.nuError = wrapped_distance(nu0, rec.nuHat);
    } catch (const std::exception&) {
      rec.alphaHat = Complex(kNaN, kNaN);
      rec.nuHat = kNaN;
      rec.normError = kNaN;
      rec.nuError = kNaN;
      rec.status = "error";
    }
    if (cfg.recordWallTime) {
      rec.wallTimeMs = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

CampaignResult run_campaign(const ExperimentConfig& cfg) {
  cfg.validate();
  std::optional<TransmitSequence> fileSequence;
  if (!cfg.sequenceFile.empty()) fileSequence = read_sequence_file(cfg.sequenceFile);

  std::vector<std::unique_ptr<Cell>> cells;
  for (const int n : cfg.Nlist) {
    for (const double v : cfg.noiseVarList) cells.push_back(build_cell(cfg, n, v, fileSequence));
  }

  const std::size_t tasks = cells.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialRecord>> results(tasks);
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (std::size_t t = next.fetch_add(1); t < tasks; t = next.fetch_add(1)) {
      const std::size_t c = t / static_cast<std::size_t>(cfg.trials);
      const int trial = static_cast<int>(t % static_cast<std::size_t>(cfg.trials));
      results[t] = run_trial(cfg, *cells[c], trial);
    }
  };
  const int threads = std::min<int>(effective_threads(cfg), static_cast<int>(std::max<std::size_t>(tasks, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CampaignResult result;
  for (auto& r : results) {
    for (auto& rec : r) result.records.push_back(std::move(rec));
  }
  result.summary = summarize(result.records);
  return result;
}

TransmitSequence campaign_sequence(const ExperimentConfig& cfg, int n) {
  if (!cfg.sequenceFile.empty()) {
    TransmitSequence s = read_sequence_file(cfg.sequenceFile);
    require(s.length() == n, "config: sequenceFile length does not match N=" + std::to_string(n));
    return s;
  }
  return generate_unimodular_sequence(n, cfg.sequence, mix_seed({cfg.seed, kTagSequence, std::uint64_t(n)}));
}

CMatrix interference_covariance(const ExperimentConfig& cfg, const TransmitSequence& s, double noiseVar) {
  const int n = static_cast<int>(s.length());
  if (cfg.scenario == Scenario::Stationary) return stationary_covariance(s, stationary_model(cfg, n, noiseVar));
  const MovingClutterModel m = moving_model(cfg, n, noiseVar);
  return total_covariance_moving(moving_clutter_covariance(s, m), m.gamma);
}

SimulatedTrial simulate_trial(const ExperimentConfig& cfg, int n, double noiseVar, int trial) {
  cfg.validate();
  require(trial >= 0, "simulate_trial: trial index must be >= 0");
  std::optional<TransmitSequence> fileSequence;
  if (!cfg.sequenceFile.empty()) fileSequence = read_sequence_file(cfg.sequenceFile);
  const auto cell = build_cell(cfg, n, noiseVar, fileSequence);
  const TrialScenes drawn = draw_trial_scenes(cfg, *cell, trial);
  std::mt19937_64 rng = method_stream(drawn.sceneSeeds.front(), EstimateMethod::Proposed);
  SimulatedTrial out;
  out.sequence = cell->sequence;
  out.scene = drawn.scenes.front();
  out.observation = quantize(out.scene.y, design_bank(cfg, *cell, std::nullopt, rng));
  out.covariance = cell->R;
  return out;
}

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), "percentile: empty input");
  require(q >= 0.0 && q <= 1.0, "percentile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  require(!records.empty(), "summarize: no records");
  struct Group {
    SummaryRow row;
    std::vector<double> norm;
    std::vector<double> nu;
  };
  std::vector<Group> groups;
  std::map<std::tuple<int, std::uint64_t, int>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.N, double_bits(r.noiseVar), static_cast<int>(r.method));
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      Group g;
      g.row.N = r.N;
      g.row.noiseVar = r.noiseVar;
      g.row.method = r.method;
      groups.push_back(std::move(g));
    }
    Group& g = groups[it->second];
    ++g.row.count;
    if (is_failure(r)) {
      ++g.row.failures;
      continue;
    }
    g.norm.push_back(r.normError);
    g.nu.push_back(r.nuError);
  }
  std::vector<SummaryRow> rows;
  for (auto& g : groups) {
    const auto fill = [](const std::vector<double>& v, double& mean, double& median, double& p10, double& p90) {
      if (v.empty()) {
        mean = median = p10 = p90 = kNaN;
        return;
      }
      double sum = 0.0;
      for (const double x : v) sum += x;
      mean = sum / static_cast<double>(v.size());
      median = percentile(v, 0.5);
      p10 = percentile(v, 0.1);
      p90 = percentile(v, 0.9);
    };
    fill(g.norm, g.row.normMean, g.row.normMedian, g.row.normP10, g.row.normP90);
    fill(g.nu, g.row.nuMean, g.row.nuMedian, g.row.nuP10, g.row.nuP90);
    rows.push_back(g.row);
  }
  return rows;
}

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << "trialId,N,noiseVar,method,alphaTruthRe,alphaTruthIm,alphaHatRe,alphaHatIm,nuTruth,nuHat,normError,nuError,"
         "wallTimeMs,status\n";
  for (const auto& r : records) {
    out << r.trialId << ',' << r.N << ',' << format_double(r.noiseVar) << ',' << to_string(r.method) << ','
        << format_double(r.alphaTruth.real()) << ',' << format_double(r.alphaTruth.imag()) << ','
        << format_double(r.alphaHat.real()) << ',' << format_double(r.alphaHat.imag()) << ','
        << format_double(r.nuTruth) << ',' << format_double(r.nuHat) << ',' << format_double(r.normError) << ','
        << format_double(r.nuError) << ',' << format_double(r.wallTimeMs) << ',' << r.status << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "N,noiseVar,method,count,failures,normErrorMean,normErrorMedian,normErrorP10,normErrorP90,"
         "nuErrorMean,nuErrorMedian,nuErrorP10,nuErrorP90\n";
  for (const auto& r : rows) {
    out << r.N << ',' << format_double(r.noiseVar) << ',' << to_string(r.method) << ',' << r.count << ','
        << r.failures << ',' << format_double(r.normMean) << ',' << format_double(r.normMedian) << ','
        << format_double(r.normP10) << ',' << format_double(r.normP90) << ',' << format_double(r.nuMean) << ','
        << format_double(r.nuMedian) << ',' << format_double(r.nuP10) << ',' << format_double(r.nuP90) << '\n';
  }
}

std::string format_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "N" << std::setw(11) << "noiseVar" << std::setw(15) << "method" << std::right
      << std::setw(7) << "trials" << std::setw(6) << "fail" << std::setw(12) << "errMedian" << std::setw(12)
      << "errMean" << std::setw(12) << "errP10" << std::setw(12) << "errP90" << std::setw(12) << "nuMedian" << '\n';
  out << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::left << std::setw(6) << r.N << std::setw(11) << r.noiseVar << std::setw(15) << to_string(r.method)
        << std::right << std::setw(7) << r.count << std::setw(6) << r.failures << std::setw(12) << r.normMedian
        << std::setw(12) << r.normMean << std::setw(12) << r.normP10 << std::setw(12) << r.normP90 << std::setw(12)
        << r.nuMedian << '\n';
  }
  return out.str();
}

namespace {

void write_view(std::ostream& out, std::vector<SummaryRow> rows, bool byNoise) {
  std::stable_sort(rows.begin(), rows.end(), [byNoise](const SummaryRow& a, const SummaryRow& b) {
    if (a.method != b.method) return static_cast<int>(a.method) < static_cast<int>(b.method);
    if (byNoise) {
      if (a.N != b.N) return a.N < b.N;
      return a.noiseVar < b.noiseVar;
    }
    if (a.noiseVar != b.noiseVar) return a.noiseVar < b.noiseVar;
    return a.N < b.N;
  });
  out << "method,N,noiseVar,normErrorMedian,normErrorMean,normErrorP10,normErrorP90,nuErrorMedian,nuErrorMean\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.N << ',' << format_double(r.noiseVar) << ',' << format_double(r.normMedian)
        << ',' << format_double(r.normMean) << ',' << format_double(r.normP10) << ',' << format_double(r.normP90)
        << ',' << format_double(r.nuMedian) << ',' << format_double(r.nuMean) << '\n';
  }
}

}  // namespace

void write_error_vs_n_csv(std::ostream& out, const std::vector<SummaryRow>& rows) { write_view(out, rows, false); }

void write_error_vs_noise_csv(std::ostream& out, const std::vector<SummaryRow>& rows) { write_view(out, rows, true); }

void write_scatter_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << "method,trialId,re,im,N,noiseVar\n";
  std::set<std::tuple<int, std::uint64_t, int>> truthWritten;
  for (const auto& r : records) {
    if (truthWritten.insert({r.N, double_bits(r.noiseVar), r.trialId}).second) {
      out << "truth," << r.trialId << ',' << format_double(r.alphaTruth.real()) << ','
          << format_double(r.alphaTruth.imag()) << ',' << r.N << ',' << format_double(r.noiseVar) << '\n';
    }
    out << to_string(r.method) << ',' << r.trialId << ',' << format_double(r.alphaHat.real()) << ','
        << format_double(r.alphaHat.imag()) << ',' << r.N << ',' << format_double(r.noiseVar) << '\n';
  }
}

}  // namespace onebit
