#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "onebit/harness.hpp"

namespace onebit::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2 };

// Parses argv, dispatches the subcommand and maps exceptions to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Writes error_vs_N.csv, error_vs_noiseVar.csv and scatter.csv into dir.
void emit_plot_data(const CampaignResult& result, const std::string& dir);

// Applies "a.b.c=value" overrides to a JSON config text. Values are parsed as
// JSON when possible and kept as strings otherwise.
std::string apply_overrides(const std::string& jsonText, const std::vector<std::string>& overrides);

}  // namespace onebit::cli
