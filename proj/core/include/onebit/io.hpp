#pragma once

#include <iosfwd>
#include <string>

#include "onebit/common.hpp"
#include "onebit/estimate.hpp"
#include "onebit/model.hpp"
#include "onebit/sampling.hpp"

namespace onebit {

// Shortest round-trip decimal representation ("%.17g").
std::string format_double(double v);

// One sample per line as "re im". Blank lines and lines starting with '#' are skipped.
void write_complex_vector(std::ostream& out, const CVector& v);
CVector read_complex_vector(std::istream& in);

void write_sequence_file(const std::string& path, const TransmitSequence& s);
TransmitSequence read_sequence_file(const std::string& path);

// Single/parallel banks: one "re im" block per comparator, blocks separated by
// a blank line. p-bit banks start with "# pbit <bits>" and store one block per
// level index with "realLevel imagLevel" per sample.
void write_threshold_bank(std::ostream& out, const ThresholdBank& bank);
ThresholdBank read_threshold_bank(std::istream& in);

// Sign bits as "gammaR gammaI" lines, one block per comparator; p-bit
// observations store "bucketR bucketI" lines under a "# pbit" header.
void write_observation(std::ostream& out, const QuantizedObservation& obs);
QuantizedObservation read_observation(std::istream& in, const ThresholdBank& bank);

// Row-major CSV with "re im" cells separated by ';'.
void write_matrix_csv(std::ostream& out, const CMatrix& m);

// {method, alphaHat: [re, im], nuHat, objective, cycles, solverStatus}
std::string estimate_to_json(const TargetEstimate& est);

}  // namespace onebit
