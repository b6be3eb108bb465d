#include "magdirac/config.hpp"

#include <set>

#include "magdirac/fields.hpp"

namespace magdirac {

namespace {

using nlohmann::json;

/// Strict object reader: every key must be consumed before finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + label() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  void mark(const std::string& key) { seen_.insert(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError("config: missing key '" + name(key) + "'");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = raw(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: key '" + name(key) + "' has the wrong type");
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) {
      seen_.insert(key);
      return fallback;
    }
    return get<T>(key);
  }

  Section sub(const std::string& key) { return Section(raw(key), name(key)); }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("config: key '" + name(key) + "': " + what);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + name(key) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T, std::size_t N>
std::array<T, N> get_array(Section& sec, const std::string& key, std::array<T, N> fallback) {
  if (!sec.has(key)) {
    sec.mark(key);
    return fallback;
  }
  const auto v = sec.get<std::vector<T>>(key);
  if (v.size() != N) sec.fail(key, "expected " + std::to_string(N) + " entries");
  std::array<T, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

const char* lattice_name(LatticeKind k) { return k == LatticeKind::kTorus ? "torus" : "annulus"; }
const char* target_name(TargetKind k) { return k == TargetKind::kSphere ? "sphere" : "flat"; }
const char* phase_name(BoundaryPhase p) { return p == BoundaryPhase::kPeriodic ? "periodic" : "antiperiodic"; }
const char* scheme_name(Scheme s) { return s == Scheme::kSpectral ? "spectral" : "central"; }
const char* curvature_name(CurvatureForm c) { return c == CurvatureForm::kDiscrete ? "discrete" : "pointwise"; }

const char* magnetic_name(MagneticKind k) {
  switch (k) {
    case MagneticKind::kNone: return "none";
    case MagneticKind::kVolumeForm: return "volume_form";
    case MagneticKind::kHSurface: return "h_surface";
    case MagneticKind::kCustom: return "custom";
  }
  return "none";
}

const char* map_kind_name(MapInitKind k) {
  switch (k) {
    case MapInitKind::kConstant: return "constant";
    case MapInitKind::kWinding: return "winding";
    case MapInitKind::kRandomSmooth: return "random-smooth";
    case MapInitKind::kElliptic: return "elliptic";
    case MapInitKind::kStereographic: return "stereographic";
  }
  return "constant";
}

const char* spinor_kind_name(SpinorInitKind k) {
  switch (k) {
    case SpinorInitKind::kNone: return "none";
    case SpinorInitKind::kConstant: return "constant";
    case SpinorInitKind::kElliptic: return "elliptic";
  }
  return "none";
}

template <typename E, std::size_t N>
E lookup(Section& sec, const std::string& key, E fallback, const std::array<E, N>& values,
         const char* (*namer)(E)) {
  if (!sec.has(key)) {
    sec.mark(key);
    return fallback;
  }
  const auto s = sec.get<std::string>(key);
  std::string known;
  for (E v : values) {
    if (s == namer(v)) return v;
    known += known.empty() ? namer(v) : std::string(", ") + namer(v);
  }
  sec.fail(key, "unknown value '" + s + "' (expected one of: " + known + ")");
}

LatticeSpec parse_lattice(Section sec) {
  LatticeSpec l;
  l.kind = lookup(sec, "kind", LatticeKind::kTorus, std::array{LatticeKind::kTorus, LatticeKind::kAnnulus}, lattice_name);
  const auto n = get_array<int, 2>(sec, "n", {l.n1, l.n2});
  l.n1 = n[0];
  l.n2 = n[1];
  if (l.kind == LatticeKind::kTorus) {
    const auto len = get_array<double, 2>(sec, "length", {l.length1, l.length2});
    l.length1 = len[0];
    l.length2 = len[1];
  } else {
    l.r_inner = sec.get<double>("r_inner", l.r_inner);
    l.r_outer = sec.get<double>("r_outer", l.r_outer);
  }
  sec.finish();
  try {
    l.build();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: key 'lattice': ") + e.what());
  }
  return l;
}

TargetSpec parse_target(Section sec) {
  TargetSpec t;
  t.kind = lookup(sec, "kind", TargetKind::kSphere, std::array{TargetKind::kSphere, TargetKind::kFlat}, target_name);
  if (!sec.has("kind")) sec.fail("kind", "missing target name");
  t.dim = sec.get<int>("dim", t.kind == TargetKind::kSphere ? 2 : 3);
  sec.finish();
  try {
    t.build();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: key 'target.dim': ") + e.what());
  }
  return t;
}

MagneticSpec parse_magnetic(Section sec) {
  MagneticSpec m;
  m.kind = lookup(sec, "kind", MagneticKind::kNone,
                  std::array{MagneticKind::kNone, MagneticKind::kVolumeForm, MagneticKind::kHSurface}, magnetic_name);
  if (m.kind == MagneticKind::kVolumeForm) m.lambda = sec.get<double>("lambda");
  if (m.kind == MagneticKind::kHSurface) m.H = sec.get<double>("H");
  sec.finish();
  return m;
}

std::array<Complex, 2> parse_eps(Section& sec, const std::string& key, std::array<Complex, 2> fallback) {
  if (!sec.has(key)) {
    sec.mark(key);
    return fallback;
  }
  const auto v = sec.get<std::vector<std::vector<double>>>(key);
  if (v.size() != 2 || v[0].size() != 2 || v[1].size() != 2) sec.fail(key, "expected [[re, im], [re, im]]");
  return {Complex(v[0][0], v[0][1]), Complex(v[1][0], v[1][1])};
}

void parse_init(Section sec, RunConfig& c) {
  if (sec.has("map")) {
    Section m = sec.sub("map");
    auto& mi = c.map_init;
    mi.kind = lookup(m, "kind", MapInitKind::kRandomSmooth,
                     std::array{MapInitKind::kConstant, MapInitKind::kWinding, MapInitKind::kRandomSmooth,
                                MapInitKind::kElliptic, MapInitKind::kStereographic},
                     map_kind_name);
    mi.base = m.get<std::vector<double>>("base", {});
    const auto w = get_array<int, 2>(m, "winding", {mi.winding1, mi.winding2});
    mi.winding1 = w[0];
    mi.winding2 = w[1];
    mi.amplitude = m.get<double>("amplitude", mi.kind == MapInitKind::kStereographic ? 0.0 : mi.amplitude);
    mi.cutoff = m.get<double>("cutoff", mi.cutoff);
    mi.scale = m.get<double>("scale", mi.scale);
    m.finish();
  } else {
    sec.mark("map");
  }
  if (sec.has("spinor")) {
    Section s = sec.sub("spinor");
    c.spinor_init.kind =
        lookup(s, "kind", SpinorInitKind::kNone,
               std::array{SpinorInitKind::kNone, SpinorInitKind::kConstant, SpinorInitKind::kElliptic},
               spinor_kind_name);
    c.spinor_init.eps = parse_eps(s, "eps", c.spinor_init.eps);
    s.finish();
  } else {
    sec.mark("spinor");
  }
  c.snapshot = sec.get<std::string>("snapshot", "");
  sec.finish();
}

void parse_solve(Section sec, SolveConfig& s) {
  if (sec.has("mode")) {
    try {
      s.mode = solve_mode_from_string(sec.get<std::string>("mode"));
    } catch (const std::invalid_argument& e) {
      sec.fail("mode", e.what());
    }
  } else {
    sec.mark("mode");
  }
  s.max_outer = sec.get<int>("max_outer", s.max_outer);
  s.flow_dt = sec.get<double>("flow_dt", s.flow_dt);
  s.tol_map = sec.get<double>("tol_map", s.tol_map);
  s.tol_spinor = sec.get<double>("tol_spinor", s.tol_spinor);
  s.k_eigs = sec.get<int>("k_eigs", s.k_eigs);
  s.spinor_norm = sec.get<double>("spinor_norm", s.spinor_norm);
  s.refresh_interval = sec.get<int>("refresh_interval", s.refresh_interval);
  s.near_kernel = sec.get<double>("near_kernel", s.near_kernel);
  sec.finish();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void parse_diagnostics(Section sec, DiagnosticsConfig& d) {
  if (sec.has("enabled")) {
    d.enabled = sec.get<std::vector<std::string>>("enabled");
    const auto& all = diagnostic_names();
    for (const auto& name : *d.enabled) {
      if (std::find(all.begin(), all.end(), name) == all.end()) sec.fail("enabled", "unknown check '" + name + "'");
    }
  } else {
    sec.mark("enabled");
  }
  if (sec.has("tolerances")) {
    Section t = sec.sub("tolerances");
    auto& tol = d.tol;
    tol.trace_rel = t.get<double>("trace_rel", tol.trace_rel);
    tol.skew_rel = t.get<double>("skew_rel", tol.skew_rel);
    tol.divergence_rel = t.get<double>("divergence_rel", tol.divergence_rel);
    tol.dbar_rel = t.get<double>("dbar_rel", tol.dbar_rel);
    tol.conformal_drift = t.get<double>("conformal_drift", tol.conformal_drift);
    tol.gradcheck_maxrel = t.get<double>("gradcheck_maxrel", tol.gradcheck_maxrel);
    tol.decay_ratio = t.get<double>("decay_ratio", tol.decay_ratio);
    tol.epsreg_ratio = t.get<double>("epsreg_ratio", tol.epsreg_ratio);
    tol.density_variance = t.get<double>("density_variance", tol.density_variance);
    tol.polar_rel = t.get<double>("polar_rel", tol.polar_rel);
    tol.small_energy = t.get<double>("small_energy", tol.small_energy);
    t.finish();
  } else {
    sec.mark("tolerances");
  }
  if (sec.has("oracle")) {
    Section o = sec.sub("oracle");
    d.oracle.probes = o.get<int>("probes", d.oracle.probes);
    d.oracle.eps = o.get<double>("eps", d.oracle.eps);
    o.finish();
    if (d.oracle.probes < 1) throw ConfigError("config: key 'diagnostics.oracle.probes' must be positive");
    if (d.oracle.eps < 1e-7 || d.oracle.eps > 1e-3) {
      throw ConfigError("config: key 'diagnostics.oracle.eps' must lie in [1e-7, 1e-3]");
    }
  } else {
    sec.mark("oracle");
  }
  sec.finish();
}

}  // namespace

Lattice LatticeSpec::build() const {
  return kind == LatticeKind::kTorus ? Lattice::torus(n1, n2, length1, length2)
                                     : Lattice::annulus(n1, n2, r_inner, r_outer);
}

TargetManifold TargetSpec::build() const {
  return kind == TargetKind::kSphere ? TargetManifold::sphere(dim) : TargetManifold::flat(dim);
}

MagneticData MagneticSpec::build(const TargetManifold& target) const {
  switch (kind) {
    case MagneticKind::kVolumeForm: return MagneticData::volume_form(target, lambda);
    case MagneticKind::kHSurface: return MagneticData::h_surface(target, H);
    default: return MagneticData::none(target.q());
  }
}

bool RunConfig::needs_seed(bool with_diagnostics) const {
  const bool noisy_map = snapshot.empty() && (map_init.kind == MapInitKind::kRandomSmooth ||
                                              (map_init.kind == MapInitKind::kStereographic && map_init.amplitude > 0.0));
  const auto& on = diagnostics.enabled;
  const bool oracle = with_diagnostics && (!on || std::find(on->begin(), on->end(), "gradcheck") != on->end());
  return noisy_map || oracle;
}

void RunConfig::finalize(std::optional<std::uint64_t> seed_override, bool with_diagnostics) {
  if (seed_override) seed = seed_override;
  if (!seed) {
    if (needs_seed(with_diagnostics)) throw ConfigError("config: key 'seed' is required when the run draws random numbers");
    return;
  }
  map_init.seed = *seed;
  diagnostics.oracle.seed = *seed;
}

RunConfig parse_config(const json& doc) {
  Section root(doc, "");
  RunConfig c;
  if (!root.has("version")) throw ConfigError("config: missing key 'version'");
  if (root.get<int>("version") != 1) root.fail("version", "unsupported version (expected 1)");
  if (root.has("seed")) {
    const json& s = root.raw("seed");
    if (!s.is_number_unsigned()) root.fail("seed", "must be a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  } else {
    root.mark("seed");
  }
  if (!root.has("lattice")) throw ConfigError("config: missing key 'lattice'");
  c.lattice = parse_lattice(root.sub("lattice"));
  if (!root.has("target")) throw ConfigError("config: missing key 'target'");
  c.target = parse_target(root.sub("target"));
  const auto target = c.target.build();
  if (root.has("magnetic")) {
    c.magnetic = parse_magnetic(root.sub("magnetic"));
  } else {
    root.mark("magnetic");
  }
  try {
    c.magnetic.build(target);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: key 'magnetic': ") + e.what());
  }

  auto& ops = c.solve.ops;
  if (root.has("spin")) {
    const auto sp = root.get<std::vector<std::string>>("spin");
    if (sp.size() != 2) root.fail("spin", "expected two boundary phases");
    BoundaryPhase ph[2];
    for (int a = 0; a < 2; ++a) {
      if (sp[a] == "periodic") {
        ph[a] = BoundaryPhase::kPeriodic;
      } else if (sp[a] == "antiperiodic") {
        ph[a] = BoundaryPhase::kAntiperiodic;
      } else {
        root.fail("spin", "unknown phase '" + sp[a] + "' (expected periodic or antiperiodic)");
      }
    }
    ops.spin = {ph[0], ph[1]};
  } else {
    root.mark("spin");
  }
  ops.scheme = lookup(root, "scheme", Scheme::kSpectral, std::array{Scheme::kSpectral, Scheme::kCentral}, scheme_name);
  ops.curvature = lookup(root, "curvature", CurvatureForm::kDiscrete,
                         std::array{CurvatureForm::kDiscrete, CurvatureForm::kPointwise}, curvature_name);

  if (root.has("init")) {
    parse_init(root.sub("init"), c);
  } else {
    root.mark("init");
  }
  if (root.has("solve")) {
    parse_solve(root.sub("solve"), c.solve);
  } else {
    root.mark("solve");
  }
  if (root.has("spectrum")) {
    Section sp = root.sub("spectrum");
    c.spectrum_eigs = sp.get<int>("k_eigs", c.spectrum_eigs);
    sp.finish();
    if (c.spectrum_eigs < 1) throw ConfigError("config: key 'spectrum.k_eigs' must be >= 1");
  } else {
    root.mark("spectrum");
  }
  if (root.has("diagnostics")) {
    parse_diagnostics(root.sub("diagnostics"), c.diagnostics);
  } else {
    root.mark("diagnostics");
  }
  if (root.has("output")) {
    Section o = root.sub("output");
    c.out_dir = o.get<std::string>("dir", c.out_dir);
    c.wall_time = o.get<bool>("wall_time", c.wall_time);
    o.finish();
  } else {
    root.mark("output");
  }
  root.finish();
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError("config: cannot read '" + path + "': " + e.what());
  }
  return parse_config_text(text);
}

nlohmann::json config_to_json(const RunConfig& c) {
  json j;
  j["version"] = 1;
  if (c.seed) j["seed"] = *c.seed;
  json lat = {{"kind", lattice_name(c.lattice.kind)}, {"n", {c.lattice.n1, c.lattice.n2}}};
  if (c.lattice.kind == LatticeKind::kTorus) {
    lat["length"] = {c.lattice.length1, c.lattice.length2};
  } else {
    lat["r_inner"] = c.lattice.r_inner;
    lat["r_outer"] = c.lattice.r_outer;
  }
  j["lattice"] = lat;
  j["target"] = {{"kind", target_name(c.target.kind)}, {"dim", c.target.dim}};
  json mag = {{"kind", magnetic_name(c.magnetic.kind)}};
  if (c.magnetic.kind == MagneticKind::kVolumeForm) mag["lambda"] = c.magnetic.lambda;
  if (c.magnetic.kind == MagneticKind::kHSurface) mag["H"] = c.magnetic.H;
  j["magnetic"] = mag;
  const auto& ops = c.solve.ops;
  j["spin"] = {phase_name(ops.spin.phase1), phase_name(ops.spin.phase2)};
  j["scheme"] = scheme_name(ops.scheme);
  j["curvature"] = curvature_name(ops.curvature);
  const auto& mi = c.map_init;
  json map = {{"kind", map_kind_name(mi.kind)},
              {"winding", {mi.winding1, mi.winding2}},
              {"amplitude", mi.amplitude},
              {"cutoff", mi.cutoff},
              {"scale", mi.scale}};
  if (!mi.base.empty()) map["base"] = mi.base;
  const auto& e = c.spinor_init.eps;
  json init = {{"map", map},
               {"spinor",
                {{"kind", spinor_kind_name(c.spinor_init.kind)},
                 {"eps", {{e[0].real(), e[0].imag()}, {e[1].real(), e[1].imag()}}}}}};
  if (!c.snapshot.empty()) init["snapshot"] = c.snapshot;
  j["init"] = init;
  const auto& s = c.solve;
  j["solve"] = {{"mode", to_string(s.mode)},     {"max_outer", s.max_outer},
                {"flow_dt", s.flow_dt},          {"tol_map", s.tol_map},
                {"tol_spinor", s.tol_spinor},    {"k_eigs", s.k_eigs},
                {"spinor_norm", s.spinor_norm},  {"refresh_interval", s.refresh_interval},
                {"near_kernel", s.near_kernel}};
  j["spectrum"] = {{"k_eigs", c.spectrum_eigs}};
  const auto& t = c.diagnostics.tol;
  json diag = {{"tolerances",
                {{"trace_rel", t.trace_rel},
                 {"skew_rel", t.skew_rel},
                 {"divergence_rel", t.divergence_rel},
                 {"dbar_rel", t.dbar_rel},
                 {"conformal_drift", t.conformal_drift},
                 {"gradcheck_maxrel", t.gradcheck_maxrel},
                 {"decay_ratio", t.decay_ratio},
                 {"epsreg_ratio", t.epsreg_ratio},
                 {"density_variance", t.density_variance},
                 {"polar_rel", t.polar_rel},
                 {"small_energy", t.small_energy}}},
               {"oracle", {{"probes", c.diagnostics.oracle.probes}, {"eps", c.diagnostics.oracle.eps}}}};
  if (c.diagnostics.enabled) diag["enabled"] = *c.diagnostics.enabled;
  j["diagnostics"] = diag;
  j["output"] = {{"dir", c.out_dir}, {"wall_time", c.wall_time}};
  return j;
}

nlohmann::json snapshot_header(const RunConfig& c, bool has_spinor) {
  const auto full = config_to_json(c);
  json h = {{"format", "magdirac-fields"},
            {"version", 1},
            {"lattice", full["lattice"]},
            {"target", full["target"]},
            {"spin", full["spin"]},
            {"q", c.target.build().q()},
            {"has_spinor", has_spinor}};
  h["seed"] = c.seed ? json(*c.seed) : json();
  return h;
}

}  // namespace magdirac
