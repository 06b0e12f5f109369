#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mmv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitHumanReview = 2;

// Subcommands: run, keyframes, evidence, report. args excludes the program
// name. Per-case status goes to out; diagnostics and stub counters to err.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmv
