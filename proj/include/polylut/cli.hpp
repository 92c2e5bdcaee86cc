#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace polylut {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitUsage = 2,
};

/// Runs the command line (args[0] is the program name) and returns the exit
/// code. Subcommands: train, compile, emit, sweep.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses a fault spec "layer:node:address" used by `compile --inject-fault`.
struct FaultSpec {
  std::size_t layer = 0;
  std::size_t node = 0;
  std::size_t address = 0;
};
FaultSpec parse_fault(const std::string& text);

/// Parses a comma-separated list of positive integers ("2,3,4" or "1-6").
std::vector<int> parse_int_list(const std::string& text);

/// 64-bit FNV-1a of a file's bytes (or of several files in order).
std::string file_hash(const std::vector<std::string>& paths);

}  // namespace polylut
