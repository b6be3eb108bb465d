#pragma once

// Run configuration: one strict JSON document ("version": 1, unknown keys rejected).

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "magdirac/diagnostics.hpp"
#include "magdirac/solver.hpp"

namespace magdirac {

/// Bad or inconsistent configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LatticeSpec {
  LatticeKind kind = LatticeKind::kTorus;
  int n1 = 32, n2 = 32;
  double length1 = 2.0 * std::numbers::pi, length2 = 2.0 * std::numbers::pi;
  double r_inner = 0.1, r_outer = 1.0;
  Lattice build() const;
};

struct TargetSpec {
  TargetKind kind = TargetKind::kSphere;
  int dim = 2;  // sphere dimension n, or q for flat targets
  TargetManifold build() const;
};

struct MagneticSpec {
  MagneticKind kind = MagneticKind::kNone;
  double lambda = 0.0;  // volume-form strength
  double H = 0.0;       // mean curvature for h_surface
  MagneticData build(const TargetManifold& target) const;
};

enum class SpinorInitKind { kNone, kConstant, kElliptic };

struct SpinorInit {
  SpinorInitKind kind = SpinorInitKind::kNone;
  std::array<Complex, 2> eps{Complex(1.0, 0.0), Complex(0.0, 0.0)};
};

struct RunConfig {
  LatticeSpec lattice;
  TargetSpec target;
  MagneticSpec magnetic;
  MapInit map_init;
  SpinorInit spinor_init;
  std::string snapshot;  // CSV to load instead of the init specs
  SolveConfig solve;
  int spectrum_eigs = 8;
  DiagnosticsConfig diagnostics;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool wall_time = false;  // include wall-clock time in reports

  /// True when the init (or, with `diagnostics`, the gradient oracle) draws random numbers.
  bool needs_seed(bool diagnostics = true) const;
  /// Applies the seed to the map init and gradient oracle; a missing seed
  /// that randomness needs is a ConfigError.
  void finalize(std::optional<std::uint64_t> seed_override = std::nullopt, bool diagnostics = true);
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical JSON of a config (round-trips through parse_config).
nlohmann::json config_to_json(const RunConfig& config);

/// Metadata written next to a field snapshot CSV.
nlohmann::json snapshot_header(const RunConfig& config, bool has_spinor);

}  // namespace magdirac
