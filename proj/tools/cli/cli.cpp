#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "onebit/estimate.hpp"
#include "onebit/io.hpp"
#include "onebit/linalg.hpp"
#include "onebit/model.hpp"
#include "onebit/qpsolve.hpp"
#include "onebit/sampling.hpp"

namespace onebit::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Usage problems detected after argv parsing (missing files, bad flags).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir + "': " + ec.message());
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* app, ConfigArgs& args) {
  app->add_option("--config", args.path, "JSON experiment config");
  app->add_option("--set", args.overrides, "Override a config value, e.g. --set solver.tol=1e-9")->allow_extra_args(false);
}

ExperimentConfig load_config(const ConfigArgs& args) {
  std::string text = "{}";
  if (!args.path.empty()) {
    if (!fs::exists(args.path)) throw UsageError("config file not found: '" + args.path + "'");
    text = read_text_file(args.path, "config file");
  }
  return config_from_json(apply_overrides(text, args.overrides));
}

TransmitSequence sequence_for(const ExperimentConfig& cfg, const std::string& path) {
  if (!path.empty()) return read_sequence_file(path);
  if (!cfg.sequenceFile.empty()) return read_sequence_file(cfg.sequenceFile);
  return campaign_sequence(cfg, cfg.Nlist.front());
}

int selftest(std::ostream& out) {
  struct Check {
    const char* name;
    std::function<bool()> run;
  };
  const std::vector<Check> checks = {
      {"sign convention sgn(0)=+1",
       [] {
         const auto obs = quantize_one_bit(CVector::Zero(3), CVector::Zero(3));
         return obs.gammaR[0].minCoeff() == 1 && obs.gammaI[0].minCoeff() == 1;
       }},
      {"stationary covariance N=2",
       [] {
         CVector s(2);
         s << 1.0, 1.0;
         const auto seq = TransmitSequence::from_samples(s);
         const CMatrix r = stationary_covariance(seq, {0.1, 0.1 * CMatrix::Identity(2, 2)});
         return (r - 0.2 * CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15;
       }},
      {"noise-free recovery attains zero objective",
       [] {
         const auto seq = generate_unimodular_sequence(8, SequenceKind::QuadraticPhase, 1);
         const CVector& s = seq.samples();
         const CMatrix r = CMatrix::Identity(8, 8);
         const CVector y = Complex(0.7, -0.4) * s;
         const CVector lambda = 0.3 * y + CVector::Constant(8, Complex(0.05, -0.02));
         const auto obs = quantize_one_bit(y, lambda);
         const auto est = estimate_stationary(s, HermitianFactor(r), obs);
         return est.solverStatus == "optimal" && est.kktResidual <= 1e-8 && std::abs(est.objective) < 1e-6;
       }},
      {"MMF equals WLS minimizer",
       [] {
         const auto seq = generate_unimodular_sequence(6, SequenceKind::RandomPhase, 3);
         const CMatrix r = stationary_covariance(seq, {0.1, 0.1 * CMatrix::Identity(6, 6)});
         const HermitianFactor f(r);
         std::mt19937_64 rng(5);
         const CVector y = standard_complex_normal(6, rng);
         const Complex a = mmf_estimate_alpha(mmf_filter(seq.samples(), f).w, y, seq.samples());
         const double base = wls_objective(y, a, 0.0, seq.samples(), f);
         for (const Complex d : {Complex(1e-4, 0), Complex(-1e-4, 0), Complex(0, 1e-4), Complex(0, -1e-4)}) {
           if (wls_objective(y, a + d, 0.0, seq.samples(), f) < base) return false;
         }
         return true;
       }},
      {"arcsine map",
       [] {
         CMatrix x(1, 1);
         x(0, 0) = Complex(2.0 / 3.0, 0.0);
         return std::abs(arcsine_map(x)(0, 0).real() - std::sqrt(3.0) / 2.0) < 1e-15;
       }},
      {"full-precision exact recovery",
       [] {
         const auto seq = generate_unimodular_sequence(10, SequenceKind::QuadraticPhase, 0);
         const CVector y = Complex(0.5, 0.5) * seq.samples();
         const auto est = estimate_full_precision(seq.samples(), HermitianFactor(CMatrix::Identity(10, 10)), y);
         return std::abs(est.alphaHat - Complex(0.5, 0.5)) < 1e-12;
       }},
  };
  bool ok = true;
  for (const auto& c : checks) {
    bool pass = false;
    try {
      pass = c.run();
    } catch (const std::exception&) {
      pass = false;
    }
    out << "selftest: " << c.name << ": " << (pass ? "PASS" : "FAIL") << '\n';
    ok = ok && pass;
  }
  return ok ? kOk : kNumerical;
}

}  // namespace

std::string apply_overrides(const std::string& jsonText, const std::vector<std::string>& overrides) {
  Json j;
  try {
    j = Json::parse(jsonText);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("config: JSON parse error: ") + e.what());
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + ov + "' is not of the form key=value");
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
      value = raw;
    }
    Json* node = &j;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw InvalidArgument("override key '" + key + "' has an empty path component");
      if (!node->is_object()) throw InvalidArgument("override key '" + key + "' descends into a non-object");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      if (node->is_null()) *node = Json::object();
      start = dot + 1;
    }
  }
  return j.dump();
}

void emit_plot_data(const CampaignResult& result, const std::string& dir) {
  require(!result.summary.empty(), "emit_plot_data: empty summary");
  ensure_dir(dir);
  {
    auto out = open_output(fs::path(dir) / "error_vs_N.csv");
    write_error_vs_n_csv(out, result.summary);
  }
  {
    auto out = open_output(fs::path(dir) / "error_vs_noiseVar.csv");
    write_error_vs_noise_csv(out, result.summary);
  }
  {
    auto out = open_output(fs::path(dir) / "scatter.csv");
    write_scatter_csv(out, result.records);
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"One-bit radar parameter estimation toolkit", "onebit-radar"};
  app.require_subcommand(1);

  ConfigArgs simCfg;
  std::string simOut = ".";
  std::optional<int> simN;
  std::optional<double> simNoise;
  int simTrial = 0;
  auto* simulate = app.add_subcommand("simulate", "Synthesize one scene and its quantized observation");
  add_config_options(simulate, simCfg);
  simulate->add_option("--out", simOut, "Output directory");
  simulate->add_option("--N", simN, "Sequence length (default: first entry of Nlist)");
  simulate->add_option("--noise-var", simNoise, "Noise variance (default: first entry of noiseVarList)");
  simulate->add_option("--trial", simTrial, "Trial index used for seeding")->check(CLI::NonNegativeNumber);

  ConfigArgs estCfg;
  std::string estMethod = "proposed";
  std::string estSequence, estY, estThresholds, estObs, estOut, estDumpQp;
  std::optional<double> estNoise, estNu;
  auto* estimate = app.add_subcommand("estimate", "Run one estimator on observation files");
  add_config_options(estimate, estCfg);
  estimate->add_option("--method", estMethod, "proposed, bussgang or fullPrecision");
  estimate->add_option("--sequence", estSequence, "Transmit sequence file (re im per line)");
  estimate->add_option("--y", estY, "Unquantized samples for fullPrecision");
  estimate->add_option("--thresholds", estThresholds, "Threshold bank file");
  estimate->add_option("--obs", estObs, "Sign-bit observation file");
  estimate->add_option("--noise-var", estNoise, "Noise variance (default: first entry of noiseVarList)");
  estimate->add_option("--nu", estNu, "Known Doppler; skips the Doppler search");
  estimate->add_option("--out", estOut, "Write the estimate JSON here as well");
  estimate->add_option("--dump-qp", estDumpQp, "Write the recovery QP instance (stationary proposed only)");

  ConfigArgs sweepCfg;
  std::string sweepOut = "sweep_out";
  bool printConfig = false;
  std::optional<int> sweepThreads;
  auto* sweep = app.add_subcommand("sweep", "Run a Monte Carlo campaign");
  add_config_options(sweep, sweepCfg);
  sweep->add_option("--out", sweepOut, "Output directory");
  sweep->add_flag("--print-config", printConfig, "Print the effective config and exit");
  sweep->add_option("--threads", sweepThreads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (e.get_exit_code() == 0) return kOk;
    err << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (self->parsed()) return selftest(out);

    if (sweep->parsed()) {
      ExperimentConfig cfg = load_config(sweepCfg);
      if (sweepThreads) cfg.threads = *sweepThreads;
      if (printConfig) {
        out << config_to_json(cfg) << '\n';
        return kOk;
      }
      ensure_dir(sweepOut);
      {
        auto f = open_output(fs::path(sweepOut) / "effective_config.json");
        f << config_to_json(cfg) << '\n';
      }
      const CampaignResult result = run_campaign(cfg);
      {
        auto f = open_output(fs::path(sweepOut) / "trials.csv");
        write_trials_csv(f, result.records);
      }
      {
        auto f = open_output(fs::path(sweepOut) / "summary.csv");
        write_summary_csv(f, result.summary);
      }
      emit_plot_data(result, sweepOut);
      out << format_summary_table(result.summary);
      out << "wrote " << result.records.size() << " trial records to " << sweepOut << '\n';
      return kOk;
    }

    if (simulate->parsed()) {
      const ExperimentConfig cfg = load_config(simCfg);
      const int n = simN.value_or(cfg.Nlist.front());
      const double noiseVar = simNoise.value_or(cfg.noiseVarList.front());
      const SimulatedTrial sim = simulate_trial(cfg, n, noiseVar, simTrial);
      ensure_dir(simOut);
      const fs::path dir(simOut);
      write_sequence_file((dir / "sequence.txt").string(), sim.sequence);
      {
        auto f = open_output(dir / "y.txt");
        write_complex_vector(f, sim.scene.y);
      }
      {
        auto f = open_output(dir / "thresholds.txt");
        write_threshold_bank(f, sim.observation.thresholds);
      }
      {
        auto f = open_output(dir / "observation.txt");
        write_observation(f, sim.observation);
      }
      {
        auto f = open_output(dir / "covariance.csv");
        write_matrix_csv(f, sim.covariance);
      }
      Json truth;
      truth["N"] = n;
      truth["noiseVar"] = noiseVar;
      truth["alpha0"] = {sim.scene.alpha0.real(), sim.scene.alpha0.imag()};
      truth["nu"] = sim.scene.nu;
      {
        auto f = open_output(dir / "truth.json");
        f << truth.dump(2) << '\n';
      }
      out << "wrote scene (N=" << n << ", noiseVar=" << noiseVar << ") to " << simOut << '\n';
      return kOk;
    }

    if (estimate->parsed()) {
      const ExperimentConfig cfg = load_config(estCfg);
      const EstimateMethod method = estimate_method_from_string(estMethod);
      const TransmitSequence seq = sequence_for(cfg, estSequence);
      const CVector& s = seq.samples();
      const double noiseVar = estNoise.value_or(cfg.noiseVarList.front());
      const CMatrix r = interference_covariance(cfg, seq, noiseVar);
      const HermitianFactor factor(r);
      const bool moving = cfg.scenario == Scenario::Moving;

      TargetEstimate est;
      if (method == EstimateMethod::FullPrecision) {
        if (estY.empty()) throw UsageError("--y is required for method fullPrecision");
        std::istringstream in(read_text_file(estY, "sample file"));
        const CVector y = read_complex_vector(in);
        if (y.size() != s.size()) throw UsageError("--y length does not match the sequence length");
        est = estimate_full_precision(s, factor, y, estNu, moving && !estNu, cfg.dopplerSearch);
      } else {
        if (estThresholds.empty() || estObs.empty()) {
          throw UsageError("--thresholds and --obs are required for method " + estMethod);
        }
        std::istringstream tin(read_text_file(estThresholds, "threshold file"));
        const ThresholdBank bank = read_threshold_bank(tin);
        std::istringstream oin(read_text_file(estObs, "observation file"));
        const QuantizedObservation obs = read_observation(oin, bank);
        if (obs.length() != s.size()) throw UsageError("observation length does not match the sequence length");
        RecoveryOptions recovery;
        recovery.ridgeScale = cfg.ridgeScale;
        if (method == EstimateMethod::Proposed) {
          if (!estDumpQp.empty()) {
            const CVector sig = estNu ? CVector(s.cwiseProduct(steering_vector(*estNu, s.size()))) : s;
            const SignConstrainedQP qp = build_recovery_qp(s, mmf_filter(sig, factor).w, factor, obs, estNu, recovery);
            auto f = open_output(estDumpQp);
            dump_qp(qp, f);
          }
          if (moving && !estNu) {
            MovingOptions opts;
            opts.solver = cfg.solver;
            opts.recovery = recovery;
            opts.search = cfg.dopplerSearch;
            opts.maxCycles = cfg.maxCycles;
            opts.tol = cfg.cycleTol;
            opts.alphaPriorPower = cfg.alphaPriorPower.value_or(1.25);
            est = estimate_moving(s, factor, obs, opts);
          } else if (estNu) {
            const CVector sig = s.cwiseProduct(steering_vector(*estNu, s.size()));
            const ReceiveFilter w = mmf_filter(sig, factor);
            const QPSolution sol = solve(build_recovery_qp(s, w.w, factor, obs, estNu, recovery), cfg.solver);
            est.yHat = sol.y();
            est.alphaHat = mmf_estimate_alpha(w.w, est.yHat, sig);
            est.nuHat = *estNu;
            est.objective = sol.objective;
            est.cycles = 1;
            est.solverStatus = to_string(sol.status);
          } else {
            est = estimate_stationary(s, factor, obs, StationaryOptions{cfg.solver, recovery});
          }
        } else {
          BussgangOptions opts = cfg.bussgang;
          opts.alphaPrior = cfg.alphaPriorMean.value_or(Complex(0.0, 0.0));
          est = estimate_bussgang(s, r, obs, estNu, moving && !estNu, opts);
        }
      }
      const std::string json = estimate_to_json(est);
      out << json << '\n';
      if (!estOut.empty()) {
        auto f = open_output(estOut);
        f << json << '\n';
      }
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DegenerateFilterError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace onebit::cli
