#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hcs/config.hpp"

namespace hcs {

inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string> kSubcommands{"geom-check", "cell", "bloch", "beta", "spectrum", "validate"};

/// Runs one subcommand and writes its artifacts into config.output.
/// Returns 0 on success, 1 when validate reports FAIL, 2 on error (JSON payload on `err`).
int run(const std::string& subcommand, const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command line: hcspec <subcommand> --config PATH [--out DIR] [--threads N] [--seed S]
/// [--theta a,b,c] [--eps e1,e2,...] [--lambda-max L].
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace hcs
