#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hetqr {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitBadInput = 2,
  kExitSolver = 3,
  kExitPartial = 4,
};

/// Arguments exclude the program and subcommand names.
int cmd_fit(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Dispatches on args[0] ("fit" or "simulate").
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hetqr
