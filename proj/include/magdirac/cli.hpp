#pragma once

// Batch front end. Exit codes: 0 success, 1 config or I/O error,
// 2 solver / eigen-solve non-convergence, 3 diagnostics or selftest checks failed.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace magdirac {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitChecksFailed = 3;

struct CliOptions {
  std::string config;
  std::string out;  // overrides output.dir when set
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::vector<std::string> snapshots;  // diagnose inputs
};

int cmd_solve(const CliOptions& opts);
int cmd_spectrum(const CliOptions& opts);
int cmd_diagnose(const CliOptions& opts);
int cmd_selftest(const CliOptions& opts);

/// The selftest report; identical bytes for identical seeds at any thread count.
nlohmann::json selftest_report(std::uint64_t seed);

/// Parses argv and dispatches; reads MAGDIRAC_THREADS first.
int run_cli(int argc, char** argv);

}  // namespace magdirac
