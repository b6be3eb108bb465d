#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "magdirac/cli.hpp"
#include "magdirac/config.hpp"
#include "magdirac/fields.hpp"

using namespace magdirac;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({"version": 1, "seed": 5, "lattice": {"kind": "torus", "n": [8, 8]},
                         "target": {"kind": "sphere", "dim": 2}})");
}

std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("magdirac_test_config_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const json& j) const {
    std::ofstream(file(name)) << j.dump(2);
    return file(name);
  }
  std::string dir() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

CliOptions quiet_opts(const std::string& config, const std::string& out) {
  CliOptions o;
  o.config = config;
  o.out = out;
  o.quiet = true;
  return o;
}

}  // namespace

// ---- parsing --------------------------------------------------------------------

TEST(Config, MinimalDocumentUsesDefaults) {
  const auto c = parse_config(minimal());
  EXPECT_EQ(c.lattice.n1, 8);
  EXPECT_EQ(c.target.kind, TargetKind::kSphere);
  EXPECT_EQ(c.magnetic.kind, MagneticKind::kNone);
  EXPECT_EQ(c.solve.ops.scheme, Scheme::kSpectral);
  EXPECT_EQ(c.map_init.kind, MapInitKind::kRandomSmooth);
  ASSERT_TRUE(c.seed.has_value());
  EXPECT_EQ(*c.seed, 5u);
  EXPECT_FALSE(c.diagnostics.enabled.has_value());
}

TEST(Config, UnknownKeysAreRejectedWithTheirPath) {
  auto doc = minimal();
  doc["colour"] = "blue";
  EXPECT_NE(error_of(doc).find("unknown key 'colour'"), std::string::npos);
  doc = minimal();
  doc["lattice"]["spacing"] = 0.1;
  EXPECT_NE(error_of(doc).find("'lattice.spacing'"), std::string::npos);
  doc = minimal();
  doc["diagnostics"] = {{"tolerances", {{"trace", 1.0}}}};
  EXPECT_NE(error_of(doc).find("'diagnostics.tolerances.trace'"), std::string::npos);
  // Annulus radii are not torus keys.
  doc = minimal();
  doc["lattice"]["r_inner"] = 0.2;
  EXPECT_NE(error_of(doc).find("'lattice.r_inner'"), std::string::npos);
}

TEST(Config, VersionAndRequiredSections) {
  auto doc = minimal();
  doc.erase("version");
  EXPECT_NE(error_of(doc).find("'version'"), std::string::npos);
  doc = minimal();
  doc["version"] = 2;
  EXPECT_NE(error_of(doc).find("unsupported version"), std::string::npos);
  doc = minimal();
  doc.erase("target");
  EXPECT_NE(error_of(doc).find("'target'"), std::string::npos);
  doc = minimal();
  doc["target"].erase("kind");
  EXPECT_NE(error_of(doc).find("missing target name"), std::string::npos);
}

TEST(Config, BadValuesNameTheKey) {
  auto doc = minimal();
  doc["lattice"]["n"] = json::array({8, "eight"});
  EXPECT_NE(error_of(doc).find("'lattice.n'"), std::string::npos);
  doc = minimal();
  doc["scheme"] = "upwind";
  EXPECT_NE(error_of(doc).find("expected one of: spectral, central"), std::string::npos);
  doc = minimal();
  doc["spin"] = {"periodic", "twisted"};
  EXPECT_NE(error_of(doc).find("'spin'"), std::string::npos);
  doc = minimal();
  doc["magnetic"] = {{"kind", "volume_form"}};
  EXPECT_NE(error_of(doc).find("'magnetic.lambda'"), std::string::npos);
  doc = minimal();
  doc["magnetic"] = {{"kind", "h_surface"}, {"H", 1.0}};
  EXPECT_NE(error_of(doc).find("'magnetic'"), std::string::npos);
  doc = minimal();
  doc["seed"] = -3;
  EXPECT_NE(error_of(doc).find("'seed'"), std::string::npos);
  doc = minimal();
  doc["diagnostics"] = {{"oracle", {{"eps", 1e-2}}}};
  EXPECT_NE(error_of(doc).find("'diagnostics.oracle.eps'"), std::string::npos);
  doc = minimal();
  doc["diagnostics"] = {{"enabled", {"stress", "vibes"}}};
  EXPECT_NE(error_of(doc).find("unknown check 'vibes'"), std::string::npos);
  doc = minimal();
  doc["solve"] = {{"k_eigs", 0}};
  EXPECT_FALSE(error_of(doc).empty());
  EXPECT_THROW(parse_config_text("{\"version\": 1,"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, CanonicalJsonRoundTrips) {
  auto doc = minimal();
  doc["lattice"] = {{"kind", "annulus"}, {"n", {16, 24}}, {"r_inner", 0.05}, {"r_outer", 2.0}};
  doc["target"] = {{"kind", "sphere"}, {"dim", 3}};
  doc["magnetic"] = {{"kind", "volume_form"}, {"lambda", 1.25}};
  doc["scheme"] = "central";
  doc["init"] = {{"map", {{"kind", "stereographic"}, {"amplitude", 0.0}}},
                 {"spinor", {{"kind", "constant"}, {"eps", {{0.5, 0.25}, {0.0, -1.0}}}}}};
  doc["solve"] = {{"mode", "map-only"}, {"max_outer", 17}};
  doc["diagnostics"] = {{"enabled", {"decay", "polar"}}, {"tolerances", {{"polar_rel", 0.5}}}};
  doc["output"] = {{"dir", "somewhere"}, {"wall_time", true}};
  const auto c = parse_config(doc);
  const auto canon = config_to_json(c);
  EXPECT_EQ(config_to_json(parse_config(canon)), canon);
  EXPECT_EQ(canon["lattice"]["r_inner"].get<double>(), 0.05);
  EXPECT_EQ(canon["solve"]["max_outer"].get<int>(), 17);
  EXPECT_EQ(canon["init"]["spinor"]["eps"][1][1].get<double>(), -1.0);
  EXPECT_EQ(canon["diagnostics"]["enabled"].size(), 2u);
}

TEST(Config, SeedRequiredOnlyWhenRandomnessIsDrawn) {
  auto doc = minimal();
  doc.erase("seed");
  auto c = parse_config(doc);
  EXPECT_TRUE(c.needs_seed());
  EXPECT_THROW(c.finalize(), ConfigError);
  c.finalize(std::uint64_t{9});
  EXPECT_EQ(c.map_init.seed, 9u);
  EXPECT_EQ(c.diagnostics.oracle.seed, 9u);

  doc["init"] = {{"map", {{"kind", "constant"}}}};
  c = parse_config(doc);
  EXPECT_TRUE(c.needs_seed(true));
  EXPECT_FALSE(c.needs_seed(false));
  EXPECT_NO_THROW(c.finalize(std::nullopt, false));
  doc["diagnostics"] = {{"enabled", {"stress"}}};
  EXPECT_FALSE(parse_config(doc).needs_seed(true));

  // The command-line seed wins over the config.
  c = parse_config(minimal());
  c.finalize(std::uint64_t{77});
  EXPECT_EQ(c.map_init.seed, 77u);
}

TEST(Config, SnapshotHeaderDescribesTheFields) {
  const auto h = snapshot_header(parse_config(minimal()), true);
  EXPECT_EQ(h["format"], "magdirac-fields");
  EXPECT_EQ(h["q"].get<int>(), 3);
  EXPECT_TRUE(h["has_spinor"].get<bool>());
  EXPECT_EQ(h["seed"].get<int>(), 5);
}

// ---- commands and exit codes ----------------------------------------------------

TEST(Cli, SolveConvergesAndWritesOutputs) {
  TempDir tmp;
  auto doc = minimal();
  doc["init"] = {{"map", {{"kind", "random-smooth"}, {"amplitude", 0.2}, {"cutoff", 2.0}}}};
  doc["solve"] = {{"mode", "map-only"}, {"max_outer", 2000}};
  doc["diagnostics"] = {{"enabled", {"stress", "gradcheck"}}, {"oracle", {{"probes", 10}}}};
  const auto out = tmp.file("out");
  EXPECT_EQ(cmd_solve(quiet_opts(tmp.write("c.json", doc), out)), kExitOk);
  for (const char* name : {"solve_report.json", "fields.csv", "fields.json", "diagnostics.json", "diagnostics.csv"})
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out) / name)) << name;
  const auto lattice = parse_config(doc).lattice.build();
  EXPECT_NO_THROW(read_fields_csv((std::filesystem::path(out) / "fields.csv").string(), lattice, 3));
}

TEST(Cli, NonConvergenceExitsTwo) {
  TempDir tmp;
  auto doc = minimal();
  doc["solve"] = {{"mode", "map-only"}, {"max_outer", 1}};
  doc["diagnostics"] = {{"enabled", json::array()}};
  EXPECT_EQ(cmd_solve(quiet_opts(tmp.write("c.json", doc), tmp.file("out"))), kExitNotConverged);
}

TEST(Cli, FailedChecksExitThree) {
  TempDir tmp;
  auto doc = minimal();
  doc["init"] = {{"map", {{"kind", "random-smooth"}, {"amplitude", 0.8}}}};
  doc["diagnostics"] = {{"enabled", {"stress"}}};
  EXPECT_EQ(cmd_diagnose(quiet_opts(tmp.write("c.json", doc), tmp.file("out"))), kExitChecksFailed);
  // The same fields pass checks that hold off-shell.
  doc["diagnostics"] = {{"enabled", {"gradcheck"}}, {"oracle", {{"probes", 10}}}};
  EXPECT_EQ(cmd_diagnose(quiet_opts(tmp.write("c2.json", doc), tmp.file("out2"))), kExitOk);
}

TEST(Cli, DiagnoseReadsSnapshots) {
  TempDir tmp;
  auto doc = minimal();
  doc["init"] = {{"map", {{"kind", "constant"}}}};
  doc["diagnostics"] = {{"enabled", {"stress", "density"}}};
  const auto lattice = parse_config(doc).lattice.build();
  MapInit spec;
  spec.kind = MapInitKind::kConstant;
  const auto phi = init_map(spec, lattice, TargetManifold::sphere(2));
  write_fields_csv(tmp.file("a.csv"), lattice, phi, nullptr);
  write_fields_csv(tmp.file("b.csv"), lattice, phi, nullptr);
  auto opts = quiet_opts(tmp.write("c.json", doc), tmp.file("out"));
  opts.snapshots = {tmp.file("a.csv"), tmp.file("b.csv")};
  EXPECT_EQ(cmd_diagnose(opts), kExitOk);
  std::ifstream in(tmp.file("out") + "/diagnostics.json");
  const auto j = json::parse(in);
  EXPECT_EQ(j["reports"].size(), 2u);
  opts.snapshots = {tmp.file("missing.csv")};
  EXPECT_EQ(cmd_diagnose(opts), kExitConfig);
}

TEST(Cli, SpectrumWritesEigenvalues) {
  TempDir tmp;
  auto doc = minimal();
  doc["init"] = {{"map", {{"kind", "constant"}}}};
  doc["spectrum"] = {{"k_eigs", 4}};
  EXPECT_EQ(cmd_spectrum(quiet_opts(tmp.write("c.json", doc), tmp.file("out"))), kExitOk);
  std::ifstream in(tmp.file("out") + "/spectrum.json");
  const auto j = json::parse(in);
  EXPECT_EQ(j["kernel_dim"].get<int>(), 4);
  doc["lattice"] = {{"kind", "annulus"}, {"n", {8, 8}}};
  EXPECT_EQ(cmd_spectrum(quiet_opts(tmp.write("c2.json", doc), tmp.file("out"))), kExitConfig);
}

TEST(Cli, ConfigErrorsExitOne) {
  TempDir tmp;
  EXPECT_EQ(cmd_solve(quiet_opts(tmp.file("absent.json"), tmp.file("out"))), kExitConfig);
  auto doc = minimal();
  doc["bogus"] = true;
  EXPECT_EQ(cmd_solve(quiet_opts(tmp.write("c.json", doc), tmp.file("out"))), kExitConfig);
  doc = minimal();
  doc.erase("seed");
  EXPECT_EQ(cmd_diagnose(quiet_opts(tmp.write("c2.json", doc), tmp.file("out"))), kExitConfig);
  EXPECT_EQ(cmd_solve(quiet_opts("", tmp.file("out"))), kExitConfig);
}

TEST(Cli, ArgumentParsing) {
  TempDir tmp;
  const std::string out = tmp.file("out");
  std::vector<std::string> args = {"magdirac", "selftest", "--seed", "3", "--quiet", "--out", out};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  EXPECT_EQ(run_cli(static_cast<int>(argv.size()), argv.data()), kExitOk);
  std::ifstream in(out + "/selftest.json");
  EXPECT_EQ(json::parse(in)["seed"].get<int>(), 3);

  std::vector<std::string> bad = {"magdirac", "solve"};
  std::vector<char*> bargv;
  for (auto& a : bad) bargv.push_back(a.data());
  EXPECT_EQ(run_cli(static_cast<int>(bargv.size()), bargv.data()), kExitConfig);
  std::vector<std::string> unknown = {"magdirac", "frobnicate"};
  std::vector<char*> uargv;
  for (auto& a : unknown) uargv.push_back(a.data());
  EXPECT_EQ(run_cli(static_cast<int>(uargv.size()), uargv.data()), kExitConfig);
}
