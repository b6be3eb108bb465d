#include "magdirac/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "magdirac/config.hpp"
#include "magdirac/parallel.hpp"

namespace magdirac {

namespace {

struct Setup {
  RunConfig config;
  Lattice lattice;
  TargetManifold target;
  MagneticData magnetic;
};

Setup load_setup(const CliOptions& opts, bool diagnostics = true) {
  if (opts.config.empty()) throw ConfigError("config: no --config file given");
  RunConfig config = load_config(opts.config);
  if (!opts.out.empty()) config.out_dir = opts.out;
  config.finalize(opts.seed, diagnostics);
  const auto lattice = config.lattice.build();
  const auto target = config.target.build();
  const auto magnetic = config.magnetic.build(target);
  return {config, lattice, target, magnetic};
}

/// Initial or snapshot fields; `path` overrides the config.
FieldSnapshot load_fields(const Setup& s, const std::string& path = {}) {
  const std::string snap = path.empty() ? s.config.snapshot : path;
  if (!snap.empty()) return read_fields_csv(snap, s.lattice, s.target.q());
  FieldSnapshot f;
  f.phi = init_map(s.config.map_init, s.lattice, s.target);
  switch (s.config.spinor_init.kind) {
    case SpinorInitKind::kNone: break;
    case SpinorInitKind::kConstant:
      f.psi = constant_spinor(s.lattice, f.phi, s.target, s.config.spinor_init.eps);
      break;
    case SpinorInitKind::kElliptic: {
      if (s.config.map_init.kind != MapInitKind::kElliptic) {
        throw ConfigError("config: key 'init.spinor.kind': elliptic spinor needs the elliptic map");
      }
      f.psi = elliptic_pair(s.lattice, s.config.spinor_init.eps).psi;
      break;
    }
  }
  return f;
}

std::string out_path(const RunConfig& c, const std::string& name) {
  return (std::filesystem::path(c.out_dir) / name).string();
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

void write_snapshot(const Setup& s, const std::string& stem, const MapField& phi, const SpinorField* psi) {
  write_fields_csv(out_path(s.config, stem + ".csv"), s.lattice, phi, psi);
  write_json(out_path(s.config, stem + ".json"), snapshot_header(s.config, psi != nullptr));
}

/// Diagnostics with failures inside a check recorded instead of propagated.
DiagnosticsReport diagnose_fields(const Setup& s, const MapField& phi, const SpinorField* psi) {
  DiagnosticsConfig dc = s.config.diagnostics;
  if (dc.enabled && dc.enabled->empty()) return run_diagnostics(s.lattice, s.target, s.magnetic, phi, psi,
                                                                 s.config.solve.ops, dc);
  DiagnosticsReport rep;
  const std::vector<std::string> names = dc.enabled ? *dc.enabled : diagnostic_names();
  for (const auto& name : names) {
    dc.enabled = std::vector<std::string>{name};
    try {
      auto part = run_diagnostics(s.lattice, s.target, s.magnetic, phi, psi, s.config.solve.ops, dc);
      rep.checks.insert(rep.checks.end(), part.checks.begin(), part.checks.end());
      rep.values.insert(part.values.begin(), part.values.end());
      rep.warnings.insert(rep.warnings.end(), part.warnings.begin(), part.warnings.end());
      if (!part.decay.rows.empty()) rep.decay = part.decay;
      if (!part.polar.rows.empty()) rep.polar = part.polar;
    } catch (const std::exception& e) {
      rep.checks.push_back({name, 0.0, 0.0, "skipped"});
      rep.warnings.push_back(name + ": " + e.what());
    }
  }
  return rep;
}

void write_diagnostics(const Setup& s, const std::string& stem, const DiagnosticsReport& rep) {
  write_json(out_path(s.config, stem + ".json"), rep.to_json());
  write_text_atomic(out_path(s.config, stem + ".csv"), rep.to_csv());
  if (!rep.decay.rows.empty()) write_text_atomic(out_path(s.config, stem + "_decay.csv"), decay_to_csv(rep.decay));
  if (!rep.polar.rows.empty()) write_text_atomic(out_path(s.config, stem + "_polar.csv"), polar_to_csv(rep.polar));
}

template <typename Fn>
int guarded(const char* cmd, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "magdirac " << cmd << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "magdirac " << cmd << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "magdirac " << cmd << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    std::cerr << "magdirac " << cmd << ": " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int cmd_solve(const CliOptions& opts) {
  return guarded("solve", [&] {
    const Setup s = load_setup(opts);
    const auto fields = load_fields(s);
    const SpinorField* psi0 = fields.psi ? &*fields.psi : nullptr;
    const auto result = solve_coupled(s.lattice, s.target, s.magnetic, fields.phi, psi0, s.config.solve, !opts.quiet);
    const auto& rep = result.report;
    const SpinorField* psi = s.config.solve.mode != SolveMode::kMapOnly ? &result.psi : nullptr;
    write_json(out_path(s.config, "solve_report.json"), rep.to_json(s.config.wall_time));
    write_snapshot(s, "fields", result.phi, psi);
    write_diagnostics(s, "diagnostics", diagnose_fields(s, result.phi, psi));
    if (!opts.quiet) std::cerr << "solve: " << rep.status << " after " << rep.iterations << " outer iterations\n";
    return rep.status == "converged" ? kExitOk : kExitNotConverged;
  });
}

int cmd_spectrum(const CliOptions& opts) {
  return guarded("spectrum", [&] {
    const Setup s = load_setup(opts, false);
    if (!s.lattice.is_torus()) throw ConfigError("config: key 'lattice.kind': spectrum needs a torus lattice");
    const auto fields = load_fields(s);
    const MapField phi = project_map(fields.phi, s.target);
    SpinorSpectrum spec;
    try {
      spec = solve_spinor(s.lattice, s.target, phi, s.config.solve.ops.spin, s.config.spectrum_eigs,
                          s.config.solve.tol_spinor, nullptr, s.config.solve.ops.scheme);
    } catch (const std::runtime_error& e) {
      std::cerr << "magdirac spectrum: " << e.what() << "\n";
      return kExitNotConverged;
    }
    std::ostringstream csv;
    csv << "index,eigenvalue,abs_eigenvalue,residual\n";
    char buf[128];
    for (std::size_t k = 0; k < spec.eigenvalues.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, spec.eigenvalues[k],
                    std::abs(spec.eigenvalues[k]), spec.residuals[k]);
      csv << buf;
    }
    write_text_atomic(out_path(s.config, "spectrum.csv"), csv.str());
    write_json(out_path(s.config, "spectrum.json"), {{"eigenvalues", spec.eigenvalues},
                                                     {"residuals", spec.residuals},
                                                     {"kernel_dim", spec.kernel_dim},
                                                     {"iterations", spec.iterations},
                                                     {"min_wavenumber", s.lattice.min_wavenumber()}});
    if (!opts.quiet) std::cerr << "spectrum: kernel dimension " << spec.kernel_dim << "\n";
    return kExitOk;
  });
}

int cmd_diagnose(const CliOptions& opts) {
  return guarded("diagnose", [&] {
    const Setup s = load_setup(opts);
    std::vector<std::string> inputs = opts.snapshots;
    if (inputs.empty()) inputs.push_back("");
    nlohmann::json all = nlohmann::json::array();
    bool passed = true;
    for (const auto& path : inputs) {
      const auto fields = load_fields(s, path);
      const SpinorField* psi = fields.psi ? &*fields.psi : nullptr;
      const MapField phi = project_map(fields.phi, s.target);
      const auto rep = diagnose_fields(s, phi, psi);
      for (const auto& w : rep.warnings)
        if (!opts.quiet || rep.checks.empty()) std::cerr << "diagnose: warning: " << w << "\n";
      passed = passed && rep.passed();
      auto j = rep.to_json();
      j["snapshot"] = path.empty() ? (s.config.snapshot.empty() ? "<init>" : s.config.snapshot) : path;
      all.push_back(j);
      if (inputs.size() == 1) write_diagnostics(s, "diagnostics", rep);
    }
    if (inputs.size() > 1) write_json(out_path(s.config, "diagnostics.json"), {{"reports", all}});
    if (!opts.quiet) std::cerr << "diagnose: " << (passed ? "all checks passed" : "checks failed") << "\n";
    return passed ? kExitOk : kExitChecksFailed;
  });
}

// ---- selftest -------------------------------------------------------------------------

namespace {

struct SelfCheck {
  std::string name;
  double value;
  double tolerance;
};

double clifford_defect() {
  const auto& c = CliffordRep::standard();
  double worst = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Eigen::Matrix2cd m = c.gamma(a) * c.gamma(b) + c.gamma(b) * c.gamma(a);
      if (a == b) m += 2.0 * Eigen::Matrix2cd::Identity();
      worst = std::max(worst, m.cwiseAbs().maxCoeff());
    }
  return worst;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

double max_abs(const std::vector<double>& a) {
  double worst = 0.0;
  for (double v : a) worst = std::max(worst, std::abs(v));
  return worst;
}

std::vector<SelfCheck> run_selftests(std::uint64_t seed) {
  std::vector<SelfCheck> out;
  const auto torus = Lattice::torus(16, 16, 2.0 * std::numbers::pi, 2.0 * std::numbers::pi);
  const auto s2 = TargetManifold::sphere(2);
  const auto s3 = TargetManifold::sphere(3);
  const auto r3 = TargetManifold::flat(3);
  const OperatorOptions ops;
  MapInit init;
  init.seed = seed;
  init.amplitude = 0.6;

  out.push_back({"clifford_relations", clifford_defect(), 1e-14});

  const auto vol3 = MagneticData::volume_form(s3, 1.5);
  {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> samples(1000 * 4);
    for (std::size_t k = 0; k < 1000; ++k) {
      double y[4], n2 = 0.0;
      for (double& v : y) {
        v = normal(rng);
        n2 += v * v;
      }
      for (int i = 0; i < 4; ++i) samples[k * 4 + i] = y[i] / std::sqrt(n2);
    }
    out.push_back({"magnetic_antisymmetry", check_magnetic_skew(vol3, samples), 1e-12});
  }

  const MapField phi3 = init_map(init, torus, s3);
  {
    const auto Z = magnetic_force(torus, vol3, phi3, ops);
    const auto d = map_derivatives(torus, phi3, ops.scheme);
    double worst = 0.0;
    for (std::size_t s = 0; s < torus.sites(); ++s) {
      double scale = 1.0;
      for (int b = 0; b < 2; ++b) {
        double ip = 0.0, n = 0.0;
        for (int i = 0; i < 4; ++i) {
          ip += Z[s * 4 + i] * d.d(b, s, 4)[i];
          n += d.d(b, s, 4)[i] * d.d(b, s, 4)[i];
        }
        scale = std::max(scale, n);
        worst = std::max(worst, std::abs(ip) / (scale * scale));
      }
    }
    out.push_back({"magnetic_force_orthogonality", worst, 1e-10});
  }

  const MapField phi2 = init_map(init, torus, s2);
  const SpinorField psi2 = constant_spinor(torus, phi2, s2, {Complex(0.6, 0.1), Complex(-0.3, 0.5)});
  {
    const auto T = stress_tensor(torus, phi2, nullptr, s2, ops);
    out.push_back({"stress_trace_psi0", stress_norms(torus, T, ops).trace, 1e-10});
  }
  {
    const auto form = riviere_connection(torus, s2, MagneticData::none(3), phi2, &psi2, ops);
    out.push_back({"riviere_skewness", riviere_skewness(form), 1e-10});
  }
  {
    GradientOracleOptions go;
    go.probes = 60;
    go.seed = seed;
    const auto g = gradient_oracle(torus, s2, MagneticData::none(3), phi2, &psi2, ops, go);
    out.push_back({"gradient_oracle_sphere_spinor", g.max_rel, 1e-6});
  }
  {
    MapInit c;
    c.kind = MapInitKind::kConstant;
    const auto phic = init_map(c, torus, s2);
    const auto spec = solve_spinor(torus, s2, phic, SpinStructure{}, 6, 1e-8);
    out.push_back({"kernel_dim_periodic_constant_map", std::abs(spec.kernel_dim - 4.0), 0.0});
  }
  {
    const auto hs = MagneticData::h_surface(r3, 1.0);
    const MapField phi = init_map(init, torus, r3);
    const auto r = el_residual_map(torus, r3, hs, phi, nullptr, ops).field;
    std::vector<double> expect(r.size());
    laplacian(torus, phi.values, 3, ops.scheme, expect);
    const auto d = map_derivatives(torus, phi, ops.scheme);
    for (std::size_t s = 0; s < torus.sites(); ++s) {
      const double* a = d.d(0, s, 3);
      const double* b = d.d(1, s, 3);
      const double cross[3] = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
      for (int i = 0; i < 3; ++i) expect[s * 3 + i] -= 2.0 * cross[i];
    }
    out.push_back({"h_surface_reduction", max_abs_diff(r, expect) / std::max(1.0, max_abs(expect)), 1e-12});
  }
  {
    ConformalFactor u{std::vector<double>(torus.sites())};
    for (std::size_t s = 0; s < torus.sites(); ++s) u.u[s] = 0.3 * std::sin(torus.x(s)) * std::sin(torus.y(s));
    const auto c = conformal_invariance_check(torus, s3, MagneticData::none(4), phi3, nullptr, u, ops);
    out.push_back({"conformal_map_energy_identical", c.dirichlet_identical && c.magnetic_identical ? 0.0 : 1.0, 0.0});
  }
  return out;
}

}  // namespace

nlohmann::json selftest_report(std::uint64_t seed) {
  nlohmann::json checks = nlohmann::json::array();
  bool passed = true;
  for (const auto& c : run_selftests(seed)) {
    const bool ok = c.value <= c.tolerance;
    passed = passed && ok;
    checks.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", ok}});
  }
  return {{"seed", seed}, {"checks", checks}, {"passed", passed}};
}

int cmd_selftest(const CliOptions& opts) {
  return guarded("selftest", [&] {
    const std::uint64_t seed = opts.seed.value_or(1);
    const auto report = selftest_report(seed);
    const std::string dir = opts.out.empty() ? "out" : opts.out;
    write_text_atomic((std::filesystem::path(dir) / "selftest.json").string(), report.dump(2) + "\n");
    if (!opts.quiet) {
      for (const auto& c : report["checks"]) {
        std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " "
                  << c["value"].dump() << "\n";
      }
    }
    return report["passed"].get<bool>() ? kExitOk : kExitChecksFailed;
  });
}

int run_cli(int argc, char** argv) {
  configure_threads_from_env();
  CLI::App app{"Lattice solver and verification suite for magnetic Dirac-harmonic maps"};
  app.require_subcommand(1);
  CliOptions opts;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config, "JSON run configuration");
    if (needs_config) c->required();
    sub->add_option("--out", opts.out, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_flag("--quiet", opts.quiet, "suppress progress output");
  };
  auto* solve = app.add_subcommand("solve", "run the coupled solver");
  auto* spectrum = app.add_subcommand("spectrum", "low twisted-Dirac eigenvalues for a fixed map");
  auto* diagnose = app.add_subcommand("diagnose", "structural diagnostics on field snapshots");
  auto* selftest = app.add_subcommand("selftest", "invariant suite on built-in cases");
  add_common(solve, true);
  add_common(spectrum, true);
  add_common(diagnose, true);
  add_common(selftest, false);
  diagnose->add_option("snapshots", opts.snapshots, "field snapshot CSV files");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (auto* sub : {solve, spectrum, diagnose, selftest}) {
    if (sub->parsed() && sub->count("--seed")) opts.seed = seed;
  }
  if (solve->parsed()) return cmd_solve(opts);
  if (spectrum->parsed()) return cmd_spectrum(opts);
  if (diagnose->parsed()) return cmd_diagnose(opts);
  return cmd_selftest(opts);
}

}  // namespace magdirac
