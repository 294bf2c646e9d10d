#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "thick/kernels.hpp"

namespace thick::app {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Typed access to one JSON object. Every problem becomes a violation; unknown keys are
// reported when the reader goes out of scope.
class Reader {
 public:
  Reader(const Json& obj, std::string path, SchemaReport& report) : obj_(obj), path_(std::move(path)), rep_(report) {}
  Reader(const Reader&) = delete;
  ~Reader() {
    if (!obj_.is_object()) return;
    for (const auto& item : obj_.items()) {
      if (!used_.count(item.key())) fail(item.key(), "unknown field");
    }
  }

  SchemaReport& report() { return rep_; }
  std::string path(const std::string& key) const { return join(path_, key); }

  bool has(const std::string& key) {
    used_.insert(key);
    return obj_.is_object() && obj_.contains(key) && !obj_.at(key).is_null();
  }

  void fail(const std::string& key, const std::string& msg, ErrorCategory c = ErrorCategory::Usage) {
    rep_.violations.push_back({join(path_, key), msg, c});
  }

  const Json* value(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(key, "required field is missing");
      return nullptr;
    }
    return &obj_.at(key);
  }

  std::optional<double> number(const std::string& key, bool required = false) {
    const Json* v = value(key, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(key, "expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::int64_t> integer(const std::string& key, bool required = false) {
    const Json* v = value(key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      fail(key, "expected an integer");
      return std::nullopt;
    }
    return v->get<std::int64_t>();
  }

  std::optional<std::uint64_t> unsigned_integer(const std::string& key, bool required = false) {
    const Json* v = value(key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned()) {
      fail(key, "expected a nonnegative integer");
      return std::nullopt;
    }
    return v->get<std::uint64_t>();
  }

  std::optional<std::string> string(const std::string& key, bool required = false) {
    const Json* v = value(key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      fail(key, "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<bool> boolean(const std::string& key) {
    const Json* v = value(key, false);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      fail(key, "expected true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key, bool required = false) {
    const Json* v = value(key, required);
    if (!v) return std::nullopt;
    std::vector<double> out;
    if (v->is_array()) {
      for (const auto& x : *v) {
        if (!x.is_number()) break;
        out.push_back(x.get<double>());
      }
      if (out.size() == v->size()) return out;
    }
    fail(key, "expected an array of numbers");
    return std::nullopt;
  }

  std::optional<std::vector<int>> integers(const std::string& key) {
    const Json* v = value(key, false);
    if (!v) return std::nullopt;
    std::vector<int> out;
    if (v->is_array()) {
      for (const auto& x : *v) {
        if (!x.is_number_integer()) break;
        out.push_back(x.get<int>());
      }
      if (out.size() == v->size()) return out;
    }
    fail(key, "expected an array of integers");
    return std::nullopt;
  }

  const Json* object(const std::string& key, bool required = false) {
    const Json* v = value(key, required);
    if (!v) return nullptr;
    if (!v->is_object()) {
      fail(key, "expected an object");
      return nullptr;
    }
    return v;
  }

 private:
  const Json& obj_;
  std::string path_;
  SchemaReport& rep_;
  std::set<std::string> used_;
};

void parse_log_grid(Reader& parent, const std::string& key, LogGrid& grid) {
  const Json* j = parent.object(key);
  if (!j) return;
  Reader r(*j, parent.path(key), parent.report());
  const auto lo = r.number("lo", true), hi = r.number("hi", true);
  const auto points = r.integer("points", true);
  if (!lo || !hi || !points) return;
  if (!(*lo > 0.0) || !(*hi >= *lo)) {
    parent.fail(key, "log grid needs 0 < lo <= hi");
    return;
  }
  if (*points < 1 || *points > 10000) {
    r.fail("points", "must lie in [1, 10000]");
    return;
  }
  grid = {*lo, *hi, static_cast<int>(*points)};
}

void parse_delta(Reader& parent, const std::string& key, DeltaRule& rule) {
  const Json* v = parent.value(key, false);
  if (!v) return;
  if (v->is_string()) {
    if (v->get<std::string>() == "none") {
      rule = DeltaRule::none();
    } else {
      parent.fail(key, "expected \"none\" or an object {C, zeta}");
    }
    return;
  }
  if (!v->is_object()) {
    parent.fail(key, "expected \"none\" or an object {C, zeta}");
    return;
  }
  Reader r(*v, parent.path(key), parent.report());
  rule = DeltaRule{};
  if (auto c = r.number("C")) {
    if (*c < 0.0) r.fail("C", "must be >= 0");
    rule.C = *c;
  }
  if (auto z = r.number("zeta")) {
    if (!(*z > 0.0 && *z < 1.0)) r.fail("zeta", "must lie in (0, 1)");
    rule.zeta = *z;
  }
}

void parse_mode(Reader& parent, const std::string& key, ThickMode& mode) {
  if (auto s = parent.string(key)) {
    if (*s == "band") {
      mode = ThickMode::Band;
    } else if (*s == "at-least") {
      mode = ThickMode::AtLeast;
    } else {
      parent.fail(key, "expected \"band\" or \"at-least\"");
    }
  }
}

std::optional<CutoffSpec> parse_cutoff(const Json& j, const std::string& path, SchemaReport& rep) {
  if (!j.is_object()) {
    rep.violations.push_back({path, "expected an object"});
    return std::nullopt;
  }
  Reader r(j, path, rep);
  const std::size_t before = rep.violations.size();
  CutoffSpec spec;
  if (auto f = r.string("family", true)) {
    try {
      spec.family = family_from_string(*f);
    } catch (const Error& e) {
      r.fail("family", e.what());
    }
  }
  if (auto m = r.number("m")) spec.m = *m;
  if (auto d = r.integer("d")) spec.d = static_cast<int>(*d);
  if (const Json* mj = r.object("mollifier")) {
    Reader mr(*mj, r.path("mollifier"), rep);
    Mollifier moll;
    if (auto k = mr.string("kind", true)) {
      if (*k == "gaussian") {
        moll.kind = MollifierKind::Gaussian;
      } else if (*k == "sphere") {
        moll.kind = MollifierKind::Sphere;
      } else {
        mr.fail("kind", "expected \"gaussian\" or \"sphere\"");
      }
    }
    if (auto w = mr.number("width")) moll.width = *w;
    spec.mollifier = moll;
  }
  const auto margin = r.number("margin");
  const auto side = r.number("torus_side");
  if (spec.family == Family::GffSemigroup) {
    spec.domain = UnitSquareDomain{margin.value_or(0.2)};
    if (side) r.fail("torus_side", "gff-semigroup lives on the unit square");
  } else {
    spec.domain = TorusDomain{side.value_or(0.0)};  // 0: taken from lattice.L
    if (margin) r.fail("margin", "only gff-semigroup has a margin");
  }
  if (rep.violations.size() != before) return std::nullopt;
  CutoffSpec probe = spec;
  if (auto* t = std::get_if<TorusDomain>(&probe.domain); t && t->side == 0.0) t->side = 1.0;
  try {
    probe.validate();
  } catch (const Error& e) {
    rep.violations.push_back({path, e.what()});
    return std::nullopt;
  }
  return spec;
}

void parse_scales(Reader& top, ExperimentConfig& cfg, bool required) {
  const Json* j = top.object("scales", required);
  if (!j) return;
  Reader r(*j, "scales", top.report());
  int rules = 0;
  if (auto n = r.integer("efolds")) {
    ++rules;
    if (*n < 1 || *n > 40) {
      r.fail("efolds", "must lie in [1, 40]");
    } else {
      cfg.scales = efold_scales(static_cast<int>(*n));
    }
  }
  if (auto v = r.numbers("values")) {
    ++rules;
    cfg.scales = *v;
  }
  if (r.has("log_grid")) {
    ++rules;
    LogGrid g{0.0, 0.0, 0};
    parse_log_grid(r, "log_grid", g);
    if (g.points > 0) {
      cfg.scales = g.values();
      std::reverse(cfg.scales.begin(), cfg.scales.end());
    }
  }
  if (const Json* p = r.object("power")) {
    ++rules;
    Reader pr(*p, "scales.power", top.report());
    const auto n = pr.integer("n_max", true);
    const auto K = pr.number("K", true);
    if (n && K) {
      if (*n < 1 || !(*K > 0.0)) {
        r.fail("power", "needs n_max >= 1 and K > 0");
      } else {
        cfg.scales = power_scales(static_cast<int>(*n), *K);
      }
    }
  }
  if (rules != 1) {
    top.fail("scales", "give exactly one of efolds, values, log_grid, power");
    return;
  }
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    if (!(cfg.scales[i] > 0.0)) {
      top.fail("scales", "scales must be positive");
      return;
    }
    if (i > 0 && !(cfg.scales[i] < cfg.scales[i - 1])) {
      top.fail("scales", "scales must be strictly decreasing");
      return;
    }
  }
  if (cfg.scales.empty()) top.fail("scales", "at least one scale is required");
}

void parse_lattice(Reader& top, ExperimentConfig& cfg, bool required) {
  const Json* j = top.object("lattice", required);
  if (!j) return;
  Reader r(*j, "lattice", top.report());
  const auto N = r.integer("N", true);
  const auto L = r.number("L");
  const auto offset = r.numbers("offset");
  const auto interior = r.boolean("interior");
  if (!N) return;
  if (*N < 8 || *N % 2 != 0 || *N > 8192) {
    r.fail("N", "must be even and lie in [8, 8192]");
    return;
  }
  const bool gff = !cfg.cutoffs.empty() && cfg.cutoffs.front().family == Family::GffSemigroup;
  if (interior.value_or(gff)) {
    if (!gff) {
      r.fail("interior", "interior lattices belong to the gff-semigroup family");
      return;
    }
    if (L || offset) r.fail("interior", "an interior lattice takes neither L nor offset");
    cfg.lattice = LatticeSpec::interior(static_cast<int>(*N),
                                        std::get<UnitSquareDomain>(cfg.cutoffs.front().domain).margin);
    return;
  }
  LatticeSpec l{static_cast<int>(*N), L.value_or(1.0), {}};
  if (!(l.L > 0.0)) r.fail("L", "must be positive");
  if (offset) {
    if (offset->size() != 2) {
      r.fail("offset", "expected [x, y]");
    } else {
      l.offset = {(*offset)[0], (*offset)[1]};
    }
  }
  cfg.lattice = l;
}

void parse_thresholds(Reader& top, Thresholds& t) {
  const Json* j = top.object("thresholds");
  if (!j) return;
  Reader r(*j, "thresholds", top.report());
  auto set = [&](const char* key, double& field) {
    if (auto v = r.number(key)) {
      if (!(*v >= 0.0)) {
        r.fail(key, "must be >= 0");
      } else {
        field = *v;
      }
    }
  };
  set("b_tolerance", t.b_tolerance);
  set("b_eps", t.b_eps);
  set("psd_relative", t.psd_relative);
  set("d_terminal", t.d_terminal);
  set("trend_slope", t.trend_slope);
  set("refinement_change", t.refinement_change);
  set("max_ratio_spread", t.max_ratio_spread);
  set("decreasing_fraction", t.decreasing_fraction);
}

void parse_kernel(Reader& top, ExperimentConfig& cfg) {
  const Json* j = top.object("kernel");
  cfg.kernel.r = {0.0};
  LogGrid grid{1e-4, 1.0, 9};
  if (j) {
    Reader r(*j, "kernel", top.report());
    parse_log_grid(r, "r_grid", grid);
    if (auto v = r.numbers("r_values")) {
      if (r.has("r_grid")) r.fail("r_values", "give r_values or r_grid, not both");
      for (double x : *v) {
        if (!(x >= 0.0)) r.fail("r_values", "separations must be >= 0");
      }
      cfg.kernel.r = *v;
      return;
    }
  }
  for (double x : grid.values()) cfg.kernel.r.push_back(x);
}

void parse_sample(Reader& top, ExperimentConfig& cfg) {
  cfg.sample.probe = {{0, 0}, {1, 0}, {0, 2}, {3, 3}, {8, 0}};
  const Json* j = top.object("sample");
  if (!j) return;
  Reader r(*j, "sample", top.report());
  if (const Json* p = r.value("probe", false)) {
    std::vector<std::array<int, 2>> probe;
    bool ok = p->is_array() && !p->empty();
    if (ok) {
      for (const auto& c : *p) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() || !c[1].is_number_integer()) {
          ok = false;
          break;
        }
        probe.push_back({c[0].get<int>(), c[1].get<int>()});
      }
    }
    if (ok) {
      cfg.sample.probe = probe;
    } else {
      r.fail("probe", "expected a nonempty array of [di, dj] cell offsets");
    }
  }
  if (auto s = r.integer("snapshots")) {
    if (*s < 0) r.fail("snapshots", "must be >= 0");
    cfg.sample.snapshots = static_cast<int>(*s);
  }
  if (auto b = r.boolean("field_csv")) cfg.sample.field_csv = *b;
}

void parse_gmc(Reader& top, ExperimentConfig& cfg) {
  const Json* j = top.object("gmc");
  if (!j) return;
  Reader r(*j, "gmc", top.report());
  if (auto b = r.boolean("l2")) cfg.gmc.l2 = *b;
  if (auto b = r.boolean("rooted")) cfg.gmc.rooted = *b;
  if (auto b = r.boolean("trace")) cfg.gmc.trace = *b;
  if (auto v = r.numbers("alpha")) {
    for (double a : *v) {
      if (!(a > 0.0)) r.fail("alpha", "energy exponents must be positive");
    }
    cfg.gmc.alpha = *v;
  }
}

void parse_thick(Reader& top, ExperimentConfig& cfg) {
  auto& t = cfg.thick;
  t.cells.mode = ThickMode::Band;
  t.cells.keep_grids = false;
  const Json* j = top.object("thick");
  if (!j) return;
  Reader r(*j, "thick", top.report());
  parse_delta(r, "delta", t.cells.delta);
  parse_mode(r, "mode", t.cells.mode);
  if (auto c = r.string("count")) {
    if (*c == "net") {
      t.count = CountMethod::Net;
    } else if (*c == "box") {
      t.count = CountMethod::Box;
    } else {
      r.fail("count", "expected \"net\" or \"box\"");
    }
  }
  t.cells.keep_grids = t.count == CountMethod::Box;
  if (auto w = r.integers("window")) {
    if (w->size() != 2 || (*w)[0] < 1 || (*w)[1] < (*w)[0]) {
      r.fail("window", "expected [lo, hi] with 1 <= lo <= hi");
    } else {
      t.window_lo = (*w)[0];
      t.window_hi = (*w)[1];
    }
  }
  if (auto n = r.string("normaliser")) {
    if (*n == "lattice") {
      t.lattice_normaliser = true;
    } else if (*n != "continuum") {
      r.fail("normaliser", "expected \"continuum\" or \"lattice\"");
    }
  }
  if (const Json* e = r.object("empty")) {
    Reader er(*e, "thick.empty", top.report());
    t.empty_check = true;
    t.empty_cells = t.cells;
    t.empty_cells.keep_grids = false;
    if (auto a = er.number("a", true)) t.empty_a = *a;
    if (auto n = er.integer("n")) t.empty_n = static_cast<int>(*n);
    parse_delta(er, "delta", t.empty_cells.delta);
    parse_mode(er, "mode", t.empty_cells.mode);
  }
}

void parse_check(Reader& top, ExperimentConfig& cfg) {
  const Json* j = top.object("check");
  if (!j) return;
  auto& c = cfg.check;
  Reader r(*j, "check", top.report());
  if (const Json* v = r.value("conditions", false)) {
    static const std::set<std::string> known{"A", "B", "C", "D"};
    c.conditions.clear();
    bool ok = v->is_array() && !v->empty();
    if (ok) {
      for (const auto& s : *v) {
        if (!s.is_string() || !known.count(s.get<std::string>())) {
          ok = false;
          break;
        }
        c.conditions.push_back(s.get<std::string>());
      }
    }
    if (!ok) r.fail("conditions", "expected a nonempty subset of [\"A\", \"B\", \"C\", \"D\"]");
  }
  parse_log_grid(r, "eps_grid", c.eps);
  parse_log_grid(r, "r_grid", c.r);
  if (auto v = r.integers("N_list")) c.N_list = *v;
  if (auto n = r.integer("n_max")) {
    if (*n < 1 || *n > 30) r.fail("n_max", "must lie in [1, 30]");
    c.n_max = static_cast<int>(*n);
  }
  if (auto n = r.integer("d_sets")) {
    if (*n < 1) r.fail("d_sets", "must be >= 1");
    c.d_sets = static_cast<int>(*n);
  }
  if (auto n = r.integer("d_points")) {
    if (*n < 1 || *n > 500) r.fail("d_points", "must lie in [1, 500]");
    c.d_points = static_cast<int>(*n);
  }
  if (auto v = r.numbers("b_eps")) {
    for (double e : *v) {
      if (!(e > 0.0 && e < 1.0)) r.fail("b_eps", "scales must lie in (0, 1)");
    }
    if (v->empty()) r.fail("b_eps", "at least one scale is required");
    c.b_eps = *v;
  }
}

void parse_compare(Reader& top, ExperimentConfig& cfg) {
  const Json* j = top.object("compare");
  if (!j) return;
  auto& c = cfg.compare;
  Reader r(*j, "compare", top.report());
  parse_log_grid(r, "eps_grid", c.eps);
  parse_log_grid(r, "r_grid", c.r);
  if (auto R = r.number("R")) {
    if (!(*R > 0.0)) r.fail("R", "must be positive");
    c.R = *R;
  }
  if (auto b = r.boolean("max_scaling")) c.max_scaling = *b;
}

// Torus families without an explicit side take the lattice side.
void resolve_torus(ExperimentConfig& cfg, SchemaReport& rep) {
  for (std::size_t i = 0; i < cfg.cutoffs.size(); ++i) {
    auto* t = std::get_if<TorusDomain>(&cfg.cutoffs[i].domain);
    if (!t) continue;
    if (t->side == 0.0) {
      t->side = cfg.lattice ? cfg.lattice->L : 1.0;
    } else if (cfg.lattice && std::abs(t->side - cfg.lattice->L) > 1e-12 * t->side) {
      rep.violations.push_back({"cutoff.torus_side", "must equal lattice.L"});
    }
  }
}

}  // namespace

std::string to_string(Kind k) {
  switch (k) {
    case Kind::KernelTable: return "kernel-table";
    case Kind::Sample: return "sample";
    case Kind::GmcTrace: return "gmc-trace";
    case Kind::ThickSpectrum: return "thick-spectrum";
    case Kind::CheckConditions: return "check-conditions";
    case Kind::CompareCutoffs: return "compare-cutoffs";
  }
  return "unknown";
}

std::optional<Kind> kind_from_string(const std::string& s) {
  for (Kind k : {Kind::KernelTable, Kind::Sample, Kind::GmcTrace, Kind::ThickSpectrum, Kind::CheckConditions,
                 Kind::CompareCutoffs}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

int SchemaReport::exit_code() const {
  if (violations.empty()) return 0;
  for (const auto& v : violations) {
    if (v.category != ErrorCategory::Feasibility) return 2;
  }
  return 3;
}

Json SchemaReport::to_json() const {
  Json out = Json::array();
  for (const auto& v : violations) {
    out.push_back({{"field", v.field}, {"message", v.message}, {"category", thick::to_string(v.category)}});
  }
  return out;
}

std::string SchemaReport::to_text() const {
  std::ostringstream s;
  for (const auto& v : violations) s << thick::to_string(v.category) << ": " << v.field << ": " << v.message << "\n";
  return s.str();
}

Json load_document(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) usage_error("cannot read config '" + path + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t at = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n');
    const auto nl = text.rfind('\n', at == 0 ? 0 : at - 1);
    const std::size_t column = nl == std::string::npos ? at + 1 : at - nl;
    std::ostringstream msg;
    msg << path << ": line " << line << ", column " << column << ": invalid JSON";
    usage_error(msg.str());
  }
}

SchemaReport parse_config(const Json& doc, ExperimentConfig& cfg) {
  SchemaReport rep;
  cfg = ExperimentConfig{};
  cfg.document = doc;
  if (!doc.is_object()) {
    rep.violations.push_back({"", "the config must be a JSON object"});
    return rep;
  }
  {
    Reader top(doc, "", rep);
    if (auto v = top.integer("schema_version")) {
      if (*v != kSchemaVersion) top.fail("schema_version", "unsupported schema version (expected 1)");
    }
    bool kind_ok = false;
    if (auto k = top.string("kind", true)) {
      if (auto kind = kind_from_string(*k)) {
        cfg.kind = *kind;
        kind_ok = true;
      } else {
        top.fail("kind",
                 "expected one of kernel-table, sample, gmc-trace, thick-spectrum, check-conditions, compare-cutoffs");
      }
    }
    if (auto s = top.unsigned_integer("seed", true)) cfg.seed = *s;
    const bool needs_replicas = kind_ok && cfg.kind != Kind::KernelTable && cfg.kind != Kind::CheckConditions;
    if (auto r = top.integer("replicas", needs_replicas)) {
      if (*r < 1 || *r > 100000000) {
        top.fail("replicas", "must be >= 1");
      } else {
        cfg.replicas = static_cast<int>(*r);
      }
    }
    if (auto o = top.string("output")) cfg.output = *o;
    if (auto t = top.integer("threads")) {
      if (*t < 0) top.fail("threads", "must be >= 0");
      cfg.threads = static_cast<int>(std::max<std::int64_t>(*t, 0));
    }

    // Cut-offs: "cutoff" (one) or "cutoffs" (several).
    const bool one = top.has("cutoff"), many = top.has("cutoffs");
    if (one && many) {
      top.fail("cutoffs", "give cutoff or cutoffs, not both");
    } else if (one) {
      if (auto s = parse_cutoff(doc.at("cutoff"), "cutoff", rep)) cfg.cutoffs.push_back(*s);
    } else if (many) {
      const Json& arr = doc.at("cutoffs");
      if (!arr.is_array() || arr.empty()) {
        top.fail("cutoffs", "expected a nonempty array of cut-off objects");
      } else {
        for (std::size_t i = 0; i < arr.size(); ++i) {
          if (auto s = parse_cutoff(arr[i], "cutoffs[" + std::to_string(i) + "]", rep)) cfg.cutoffs.push_back(*s);
        }
      }
    } else {
      top.fail("cutoff", "required field is missing");
    }
    const std::size_t cut_count = one ? 1 : many && doc.at("cutoffs").is_array() ? doc.at("cutoffs").size() : 0;

    const bool sampled = kind_ok && (cfg.kind == Kind::Sample || cfg.kind == Kind::GmcTrace ||
                                     cfg.kind == Kind::ThickSpectrum);
    parse_lattice(top, cfg, sampled);
    parse_scales(top, cfg, sampled || (kind_ok && (cfg.kind == Kind::KernelTable || cfg.kind == Kind::CompareCutoffs)));
    if (auto a = top.numbers("a", kind_ok && (cfg.kind == Kind::GmcTrace || cfg.kind == Kind::ThickSpectrum))) {
      for (double x : *a) {
        if (!(x >= 0.0)) top.fail("a", "thickness levels must be >= 0");
      }
      if (a->empty()) top.fail("a", "at least one level is required");
      cfg.a = *a;
    }
    parse_thresholds(top, cfg.thresholds);
    parse_kernel(top, cfg);
    parse_sample(top, cfg);
    parse_gmc(top, cfg);
    parse_thick(top, cfg);
    parse_check(top, cfg);
    parse_compare(top, cfg);

    if (kind_ok) {
      if (sampled && cut_count > 1) top.fail("cutoffs", "this kind takes exactly one cut-off");
      if (cfg.kind == Kind::CompareCutoffs && cut_count != 2) top.fail("cutoffs", "compare-cutoffs takes two cut-offs");
      if (cfg.kind == Kind::CompareCutoffs && cfg.compare.max_scaling && !cfg.scales.empty() && cfg.scales.size() < 3) {
        top.fail("scales", "insufficient data: the maximum-scaling check needs at least 3 scales");
      }
      if (cfg.kind == Kind::CompareCutoffs && cfg.scales.size() >= 1 && !(cfg.scales.front() < 1.0)) {
        top.fail("scales", "comparison scales must lie in (0, 1)");
      }
      if (cfg.kind == Kind::ThickSpectrum && !cfg.scales.empty()) {
        const int n = static_cast<int>(cfg.scales.size());
        if (cfg.thick.window_hi > n) top.fail("thick.window", "window exceeds the number of scales");
        if (cfg.thick.window_lo == 0 && n < 6) top.fail("scales", "the default fit window needs at least 6 scales");
        if (cfg.thick.empty_check && cfg.thick.empty_n == 0) cfg.thick.empty_n = n;
        if (cfg.thick.empty_check && (cfg.thick.empty_n < 1 || cfg.thick.empty_n > n)) {
          top.fail("thick.empty.n", "must lie in [1, number of scales]");
        }
      }
    }
  }
  resolve_torus(cfg, rep);

  Json hashed = doc;
  hashed.erase("output");
  hashed.erase("threads");
  cfg.hash = sha256_hex(hashed.dump());
  return rep;
}

void check_feasibility(const ExperimentConfig& cfg, SchemaReport& rep) {
  const bool sampled = cfg.kind == Kind::Sample || cfg.kind == Kind::GmcTrace || cfg.kind == Kind::ThickSpectrum;
  if (!sampled || !cfg.lattice || cfg.cutoffs.empty() || cfg.scales.empty()) return;
  const auto& spec = cfg.cutoffs.front();
  const auto& l = *cfg.lattice;
  const double eps = cfg.scales.back();
  auto refuse = [&](const std::string& field, const std::string& msg) {
    rep.violations.push_back({field, msg, ErrorCategory::Feasibility});
  };
  std::ostringstream msg;
  switch (spec.family) {
    case Family::WhiteNoise:
      if (1.0 / eps > kPi * (l.N - 1) / l.L) {
        msg << "scale " << eps << " is below the lattice Nyquist limit: |xi| <= " << 1.0 / eps << " needs N >= "
            << SpectralSampler::required_N(eps, l.L) << " at L = " << l.L;
        refuse("lattice.N", msg.str());
      }
      break;
    case Family::Mollified: {
      // Share of Var X beyond the disc inscribed in the lattice's frequency square.
      const auto moll = *spec.mollifier;
      auto w = [&](double t) {
        const double th = moll.fourier(eps * t, 2);
        return th * th;
      };
      const double total = kernel_K(0.0, eps, spec);
      auto tail = [&](int N) { return 1.0 - spectral_shell(0.0, 0.0, kPi * N / l.L, 2, spec.m, w, moll.width * eps) / total; };
      if (tail(l.N) > 0.01) {
        int N = l.N;
        while (tail(N) > 0.005) N *= 2;
        msg << "scale " << eps << " is below the lattice resolution: " << 100.0 * tail(l.N)
            << "% of Var X lies beyond the lattice frequencies; suggested N >= " << N << " at L = " << l.L;
        refuse("lattice.N", msg.str());
      }
      break;
    }
    case Family::MassiveIntegral:
      if (l.size() > 4096) refuse("lattice.N", "dense covariance factorization needs N <= 64 (N^2 <= 4096 points)");
      break;
    case Family::GffSemigroup: break;
  }
  if (spec.d != 2) refuse("cutoff.d", "samplers are planar: d must be 2");
}

SchemaReport validate(const Json& doc, ExperimentConfig& out) {
  auto rep = parse_config(doc, out);
  if (rep.ok()) check_feasibility(out, rep);
  return rep;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream s;
  for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return s.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) usage_error("cannot read '" + path + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  return sha256_hex(buf.str());
}

}  // namespace thick::app
