#include "onebit/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace onebit {

namespace {

// Splits the stream into blocks of non-comment lines separated by blank lines.
struct ParsedText {
  std::vector<std::string> header;  // '#' lines
  std::vector<std::vector<std::string>> blocks;
};

ParsedText parse_blocks(std::istream& in) {
  ParsedText out;
  std::vector<std::string> current;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) {
      if (!current.empty()) out.blocks.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (line[first] == '#') {
      out.header.push_back(line.substr(first));
      continue;
    }
    current.push_back(line);
  }
  if (!current.empty()) out.blocks.push_back(std::move(current));
  return out;
}

std::pair<double, double> parse_pair(const std::string& line) {
  std::istringstream ss(line);
  ss.imbue(std::locale::classic());
  double a = 0.0;
  double b = 0.0;
  std::string extra;
  if (!(ss >> a >> b) || (ss >> extra)) throw InvalidArgument("expected two numbers per line, got '" + line + "'");
  return {a, b};
}

CVector block_to_vector(const std::vector<std::string>& block) {
  CVector v(static_cast<Eigen::Index>(block.size()));
  for (std::size_t i = 0; i < block.size(); ++i) {
    const auto [re, im] = parse_pair(block[i]);
    v(static_cast<Eigen::Index>(i)) = Complex(re, im);
  }
  return v;
}

int to_sign(double v, const char* what) {
  if (v == 1.0) return 1;
  if (v == -1.0) return -1;
  throw InvalidArgument(std::string(what) + ": sign bits must be +1 or -1");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_complex_vector(std::ostream& out, const CVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v(i).real()) << ' ' << format_double(v(i).imag()) << '\n';
}

CVector read_complex_vector(std::istream& in) {
  const ParsedText text = parse_blocks(in);
  std::vector<std::string> all;
  for (const auto& b : text.blocks) all.insert(all.end(), b.begin(), b.end());
  return block_to_vector(all);
}

void write_sequence_file(const std::string& path, const TransmitSequence& s) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_complex_vector(out, s.samples());
}

TransmitSequence read_sequence_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open sequence file '" + path + "'");
  return TransmitSequence::from_samples(read_complex_vector(in));
}

void write_threshold_bank(std::ostream& out, const ThresholdBank& bank) {
  if (bank.kind == BankKind::PBit) {
    out << "# pbit " << bank.bits << '\n';
    for (Eigen::Index j = 0; j < bank.realLevels.cols(); ++j) {
      if (j) out << '\n';
      for (Eigen::Index i = 0; i < bank.realLevels.rows(); ++i) {
        out << format_double(bank.realLevels(i, j)) << ' ' << format_double(bank.imagLevels(i, j)) << '\n';
      }
    }
    return;
  }
  for (std::size_t k = 0; k < bank.vectors.size(); ++k) {
    if (k) out << '\n';
    write_complex_vector(out, bank.vectors[k]);
  }
}

ThresholdBank read_threshold_bank(std::istream& in) {
  const ParsedText text = parse_blocks(in);
  require(!text.blocks.empty(), "threshold file: no threshold vectors found");
  int bits = 0;
  for (const auto& h : text.header) {
    std::istringstream ss(h.substr(1));
    std::string tag;
    if (ss >> tag && tag == "pbit") {
      require(static_cast<bool>(ss >> bits), "threshold file: malformed '# pbit' header");
    }
  }
  if (bits > 0) {
    const auto levels = text.blocks.size();
    const auto n = static_cast<Eigen::Index>(text.blocks.front().size());
    RMatrix re(n, static_cast<Eigen::Index>(levels));
    RMatrix im(n, static_cast<Eigen::Index>(levels));
    for (std::size_t j = 0; j < levels; ++j) {
      const CVector v = block_to_vector(text.blocks[j]);
      require(v.size() == n, "threshold file: p-bit level blocks differ in length");
      re.col(static_cast<Eigen::Index>(j)) = v.real();
      im.col(static_cast<Eigen::Index>(j)) = v.imag();
    }
    return ThresholdBank::p_bit(bits, std::move(re), std::move(im));
  }
  std::vector<CVector> vectors;
  for (const auto& b : text.blocks) vectors.push_back(block_to_vector(b));
  return ThresholdBank::parallel(std::move(vectors));
}

void write_observation(std::ostream& out, const QuantizedObservation& obs) {
  if (obs.is_p_bit()) {
    out << "# pbit\n";
    for (Eigen::Index i = 0; i < obs.bucketR.size(); ++i) out << obs.bucketR(i) << ' ' << obs.bucketI(i) << '\n';
    return;
  }
  for (std::size_t k = 0; k < obs.comparators(); ++k) {
    if (k) out << '\n';
    for (Eigen::Index i = 0; i < obs.gammaR[k].size(); ++i) out << obs.gammaR[k](i) << ' ' << obs.gammaI[k](i) << '\n';
  }
}

QuantizedObservation read_observation(std::istream& in, const ThresholdBank& bank) {
  const ParsedText text = parse_blocks(in);
  require(!text.blocks.empty(), "observation file: no samples found");
  bank.validate();
  const Eigen::Index n = bank.length();
  QuantizedObservation obs;
  obs.thresholds = bank;
  if (bank.kind == BankKind::PBit) {
    require(text.blocks.size() == 1, "observation file: p-bit observations hold a single block");
    const auto& block = text.blocks.front();
    require(static_cast<Eigen::Index>(block.size()) == n, "observation file: length does not match thresholds");
    const int maxBucket = static_cast<int>(bank.realLevels.cols());
    obs.bucketR.resize(n);
    obs.bucketI.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [r, m] = parse_pair(block[static_cast<std::size_t>(i)]);
      obs.bucketR(i) = static_cast<int>(r);
      obs.bucketI(i) = static_cast<int>(m);
      require(r == obs.bucketR(i) && m == obs.bucketI(i), "observation file: bucket indices must be integers");
      require(obs.bucketR(i) >= 0 && obs.bucketR(i) <= maxBucket && obs.bucketI(i) >= 0 && obs.bucketI(i) <= maxBucket,
              "observation file: bucket index out of range");
    }
    return obs;
  }
  require(text.blocks.size() == bank.vectors.size(), "observation file: comparator count does not match thresholds");
  for (const auto& block : text.blocks) {
    require(static_cast<Eigen::Index>(block.size()) == n, "observation file: length does not match thresholds");
    IVector gr(n);
    IVector gi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [r, m] = parse_pair(block[static_cast<std::size_t>(i)]);
      gr(i) = to_sign(r, "observation file");
      gi(i) = to_sign(m, "observation file");
    }
    obs.gammaR.push_back(std::move(gr));
    obs.gammaI.push_back(std::move(gi));
  }
  return obs;
}

void write_matrix_csv(std::ostream& out, const CMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ';';
      out << format_double(m(i, j).real()) << ' ' << format_double(m(i, j).imag());
    }
    out << '\n';
  }
}

std::string estimate_to_json(const TargetEstimate& est) {
  nlohmann::ordered_json j;
  j["method"] = to_string(est.method);
  j["alphaHat"] = {est.alphaHat.real(), est.alphaHat.imag()};
  j["nuHat"] = est.nuHat;
  j["objective"] = est.objective;
  j["cycles"] = est.cycles;
  j["solverStatus"] = est.solverStatus;
  return j.dump(2);
}

}  // namespace onebit
