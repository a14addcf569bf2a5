#pragma once

#include <string>
#include <vector>

namespace citefix::cli {

// Entry point for the command-line pipeline. Subcommands: ingest, parse,
// verify, estimate, cohort, synth, check, report. Returns the process exit
// status: 0 success, 1 validation failure, 2 data error, 3 check-tolerance
// failure.
int run_command(const std::vector<std::string>& args);

}  // namespace citefix::cli
