#include "run.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>

#include <omp.h>

#include "thick/conditions.hpp"
#include "thick/fractal.hpp"
#include "thick/gmc.hpp"

namespace thick::app {

namespace fs = std::filesystem;

namespace {

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s2 / (n - 1.0) / n) : 0.0};
}

// Replica loop over a bounded worker pool. Results go to per-replica slots, so the
// aggregation afterwards is independent of scheduling.
void for_replicas(int replicas, const std::function<void(int)>& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < replicas; ++r) {
    try {
      body(r);
    } catch (...) {
#pragma omp critical(thick_replica_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

class Stopwatch {
 public:
  explicit Stopwatch(std::vector<StageTime>& log) : log_(log), t0_(std::chrono::steady_clock::now()) {}
  void lap(const std::string& name) {
    const auto t = std::chrono::steady_clock::now();
    log_.push_back({name, std::chrono::duration<double>(t - t0_).count()});
    t0_ = t;
  }

 private:
  std::vector<StageTime>& log_;
  std::chrono::steady_clock::time_point t0_;
};

Json report_json(const ConditionReport& r) {
  Json constants = Json::object();
  for (const auto& [k, v] : r.constants) constants[k] = v;
  return {{"id", r.id},
          {"family", r.family},
          {"probes", r.probes},
          {"constants", constants},
          {"worst_ratio", r.worst_ratio},
          {"threshold", std::isfinite(r.threshold) ? Json(r.threshold) : Json("finite")},
          {"pass", r.pass},
          {"applicable", r.applicable},
          {"status", r.status},
          {"argmax", r.argmax},
          {"probe_count", r.rows.size()}};
}

std::vector<std::string> report_columns() {
  return {"condition", "family", "x1", "y1", "x2", "y2", "eps", "eta", "n", "k", "value", "ratio"};
}

void write_rows(std::ofstream& os, const ConditionReport& r) {
  for (const auto& p : r.rows) {
    os << r.id << ',' << r.family << ',' << num(p.x.x) << ',' << num(p.x.y) << ',' << num(p.y.x) << ','
       << num(p.y.y) << ',' << num(p.eps) << ',' << num(p.eta) << ',' << p.n << ',' << p.k << ',' << num(p.value)
       << ',' << num(p.ratio) << '\n';
  }
}

// ---------------------------------------------------------------------------

Json run_kernel_table(const ExperimentConfig& cfg, OutputSet& out) {
  auto os = out.csv("kernel.csv", {"family", "eps", "r", "x1", "y1", "x2", "y2", "value", "neg_log_eps"});
  Json families = Json::array();
  for (const auto& spec : cfg.cutoffs) {
    double min_value = INFINITY, min_r = 0.0, min_eps = 0.0, diag_dev = 0.0;
    int negative = 0, rows = 0;
    for (double eps : cfg.scales) {
      for (double r : cfg.kernel.r) {
        if (r > max_probe_separation(spec)) continue;
        const auto [x, y] = probe_pair(spec, r);
        const double v = joint_covariance(spec, x, y, eps, eps);
        os << to_string(spec.family) << ',' << num(eps) << ',' << num(r) << ',' << num(x.x) << ',' << num(x.y) << ','
           << num(y.x) << ',' << num(y.y) << ',' << num(v) << ',' << num(-std::log(eps)) << '\n';
        ++rows;
        if (v < min_value) {
          min_value = v;
          min_r = r;
          min_eps = eps;
        }
        if (v < -1e-6) ++negative;
        if (r == 0.0) diag_dev = std::max(diag_dev, std::abs(v + std::log(eps)));
      }
    }
    families.push_back({{"family", to_string(spec.family)},
                        {"rows", rows},
                        {"min_value", min_value},
                        {"argmin", {{"r", min_r}, {"eps", min_eps}}},
                        {"below_minus_1e-6", negative},
                        {"max_diagonal_deviation_from_neg_log_eps", diag_dev}});
  }
  return {{"families", families}};
}

// ---------------------------------------------------------------------------

Json run_sample(const ExperimentConfig& cfg, OutputSet& out, Stopwatch& clock) {
  const auto& spec = cfg.cutoffs.front();
  const auto& lat = *cfg.lattice;
  const auto sampler = make_sampler(spec, lat, cfg.scales);
  clock.lap("build sampler");
  const int n_max = sampler->n_max(), N = lat.N;
  // Only the spectral samplers are periodic; the integral family is sampled on the plane.
  const bool torus = spec.family == Family::WhiteNoise || spec.family == Family::Mollified;
  std::vector<std::size_t> cells;
  for (const auto& [di, dj] : cfg.sample.probe) {
    int i = N / 2 + di, j = N / 2 + dj;
    if (torus) {
      i = ((i % N) + N) % N;
      j = ((j % N) + N) % N;
    } else if (i < 0 || i >= N || j < 0 || j >= N) {
      usage_error("sample.probe offset [" + std::to_string(di) + ", " + std::to_string(dj) +
                  "] leaves the lattice");
    }
    cells.push_back(static_cast<std::size_t>(j) * N + i);
  }
  const std::size_t P = cells.size();
  // values[r][(n - 1) * P + p]
  std::vector<std::vector<double>> values(cfg.replicas);
  for_replicas(cfg.replicas, [&](int r) {
    const auto f = sampler->sample(cfg.seed, static_cast<std::uint64_t>(r));
    auto& v = values[r];
    v.assign(static_cast<std::size_t>(n_max) * P, 0.0);
    std::vector<double> x(P, 0.0);
    for (int n = 1; n <= n_max; ++n) {
      for (std::size_t p = 0; p < P; ++p) {
        x[p] += f.increments[n - 1][cells[p]];
        v[(n - 1) * P + p] = x[p];
      }
    }
  });
  clock.lap("sample replicas");

  auto cov = out.csv("covariance.csv", {"n", "eps", "p", "q", "r", "empirical", "se", "kernel", "lattice_exact",
                                        "z_kernel", "z_lattice"});
  double max_z_kernel = 0.0, max_z_lattice = 0.0;
  std::vector<double> prod(cfg.replicas);
  for (int n = 1; n <= n_max; ++n) {
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t q = p; q < P; ++q) {
        for (int r = 0; r < cfg.replicas; ++r) {
          prod[r] = values[r][(n - 1) * P + p] * values[r][(n - 1) * P + q];
        }
        const auto m = mean_se(prod);
        const Point a = lat.point(cells[p]), b = lat.point(cells[q]);
        const double eps = cfg.scales[n - 1];
        // Separation on the torus is the shortest periodic one.
        Point bb = b;
        if (torus) {
          bb.x = a.x + std::remainder(b.x - a.x, lat.L);
          bb.y = a.y + std::remainder(b.y - a.y, lat.L);
        }
        const double kernel = joint_covariance(spec, a, bb, eps, eps);
        const double exact = sampler->covariance(n, n, cells[p], cells[q]);
        const double zk = (m.mean - kernel) / m.se, zl = (m.mean - exact) / m.se;
        max_z_kernel = std::max(max_z_kernel, std::abs(zk));
        max_z_lattice = std::max(max_z_lattice, std::abs(zl));
        cov << n << ',' << num(eps) << ',' << p << ',' << q << ',' << num(distance(a, bb)) << ',' << num(m.mean) << ','
            << num(m.se) << ',' << num(kernel) << ',' << num(exact) << ',' << num(zk) << ',' << num(zl) << '\n';
      }
    }
  }

  auto nest = out.csv("nesting.csv", {"j", "k", "p", "var_difference", "var_gap", "relative_gap"});
  double max_gap = 0.0;
  for (int j = 1; j <= n_max; ++j) {
    for (int k = j + 1; k <= n_max; ++k) {
      for (std::size_t p = 0; p < P; ++p) {
        const double dv = sampler->difference_variance(j, k, cells[p]);
        const double gap = sampler->variance(k, cells[p]) - sampler->variance(j, cells[p]);
        const double rel = std::abs(dv - gap) / sampler->variance(k, cells[p]);
        max_gap = std::max(max_gap, rel);
        nest << j << ',' << k << ',' << p << ',' << num(dv) << ',' << num(gap) << ',' << num(rel) << '\n';
      }
    }
  }
  clock.lap("moments");

  for (int r = 0; r < std::min(cfg.sample.snapshots, cfg.replicas); ++r) {
    const auto f = sampler->sample(cfg.seed, static_cast<std::uint64_t>(r));
    const std::string name = "field_r" + std::to_string(r) + ".thkf";
    write_snapshot(out.path(name), f);
    out.add(name);
    if (cfg.sample.field_csv) {
      const std::string csv = "field_r" + std::to_string(r) + ".csv";
      write_field_csv(out.path(csv), f);
      out.add(csv);
    }
  }
  clock.lap("snapshots");
  return {{"family", to_string(spec.family)},
          {"coupling", sampler->coupling() == Coupling::SharedModes ? "shared-modes" : "independent-increments"},
          {"replicas", cfg.replicas},
          {"probe_cells", P},
          {"max_abs_z_kernel", max_z_kernel},
          {"max_abs_z_lattice", max_z_lattice},
          {"nesting_max_relative_gap", max_gap},
          {"nesting_holds", max_gap <= 1e-10}};
}

// ---------------------------------------------------------------------------

Json run_gmc(const ExperimentConfig& cfg, OutputSet& out, Stopwatch& clock) {
  const auto& spec = cfg.cutoffs.front();
  const auto& lat = *cfg.lattice;
  const auto sampler = make_sampler(spec, lat, cfg.scales);
  clock.lap("build sampler");
  const int n_max = sampler->n_max();
  const std::size_t A = cfg.a.size(), E = cfg.gmc.alpha.size();
  struct Replica {
    std::vector<MartingaleTrace> traces;
    std::vector<RootedThickness> rooted;
    std::vector<std::vector<double>> energy;
  };
  std::vector<Replica> reps(cfg.replicas);
  for_replicas(cfg.replicas, [&](int r) {
    const auto f = sampler->sample(cfg.seed, static_cast<std::uint64_t>(r));
    auto& rep = reps[r];
    for (double a : cfg.a) {
      rep.traces.push_back(martingale_trace(f, *sampler, a));
      if (cfg.gmc.rooted || E > 0) {
        const auto m = gmc_at_scale(f, *sampler, n_max, a);
        if (cfg.gmc.rooted) rep.rooted.push_back(rooted_thickness(f, m));
        std::vector<double> e;
        for (double alpha : cfg.gmc.alpha) e.push_back(alpha_energy(m, alpha).value);
        rep.energy.push_back(std::move(e));
      }
    }
  });
  clock.lap("replicas");

  if (cfg.gmc.trace) {
    auto os = out.csv("trace.csv", {"a", "replica", "n", "total", "conditional"});
    for (std::size_t i = 0; i < A; ++i) {
      for (int r = 0; r < cfg.replicas; ++r) {
        const auto& t = reps[r].traces[i];
        for (int n = 1; n <= n_max; ++n) {
          os << num(cfg.a[i]) << ',' << r << ',' << n << ',' << num(t.total[n - 1]) << ','
             << (t.checked ? num(t.conditional[n - 1]) : std::string("nan")) << '\n';
        }
      }
    }
  }
  auto ms = out.csv("moments.csv", {"a", "n", "mean_total", "se", "base", "z"});
  Json per_a = Json::array();
  for (std::size_t i = 0; i < A; ++i) {
    const double a = cfg.a[i];
    const double base = reps.front().traces[i].base;
    Json entry = {{"a", a}, {"base", base}};
    double gap = 0.0;
    for (const auto& rep : reps) gap = std::max(gap, rep.traces[i].max_relative_gap());
    entry["martingale_checked"] = reps.front().traces[i].checked;
    entry["martingale_status"] = reps.front().traces[i].status;
    entry["max_conditional_gap"] = gap;
    Json means = Json::array();
    std::vector<double> v(cfg.replicas);
    for (int n = 1; n <= n_max; ++n) {
      for (int r = 0; r < cfg.replicas; ++r) v[r] = reps[r].traces[i].total[n - 1];
      const auto m = mean_se(v);
      const double z = m.se > 0.0 ? (m.mean - base) / m.se : (m.mean == base ? 0.0 : INFINITY);
      ms << num(a) << ',' << n << ',' << num(m.mean) << ',' << num(m.se) << ',' << num(base) << ',' << num(z) << '\n';
      means.push_back({{"n", n}, {"mean", m.mean}, {"se", m.se}, {"z", z}});
    }
    entry["mean_total"] = means;
    if (cfg.gmc.l2) {
      for (int r = 0; r < cfg.replicas; ++r) {
        const double t = reps[r].traces[i].total[n_max - 1];
        v[r] = t * t;
      }
      const auto m = mean_se(v);
      const double exact = l2_second_moment(*sampler, n_max, a);
      entry["second_moment"] = {{"n", n_max}, {"monte_carlo", m.mean}, {"se", m.se}, {"exact", exact},
                                {"z", m.se > 0.0 ? (m.mean - exact) / m.se : 0.0}};
    }
    if (cfg.gmc.rooted) {
      std::vector<RootedThickness> rt;
      for (const auto& rep : reps) rt.push_back(rep.rooted[i]);
      std::vector<double> means_r;
      for (const auto& x : rt) means_r.push_back(x.mean());
      const auto m = mean_se(means_r);
      entry["rooted_thickness"] = {{"n", n_max}, {"pooled_mean", pooled_rooted_mean(rt)},
                                   {"replica_mean", m.mean}, {"replica_se", m.se}};
    }
    if (E > 0) {
      Json energies = Json::array();
      for (std::size_t e = 0; e < E; ++e) {
        for (int r = 0; r < cfg.replicas; ++r) v[r] = reps[r].energy[i][e];
        const auto m = mean_se(v);
        energies.push_back({{"alpha", cfg.gmc.alpha[e]}, {"mean", m.mean}, {"se", m.se}});
      }
      entry["alpha_energy"] = energies;
    }
    per_a.push_back(entry);
  }
  clock.lap("aggregate");
  return {{"family", to_string(spec.family)}, {"replicas", cfg.replicas}, {"n_max", n_max}, {"levels", per_a}};
}

// ---------------------------------------------------------------------------

Json run_thick(const ExperimentConfig& cfg, OutputSet& out, Stopwatch& clock) {
  const auto& spec = cfg.cutoffs.front();
  const auto& lat = *cfg.lattice;
  const auto sampler = make_sampler(spec, lat, cfg.scales);
  clock.lap("build sampler");
  const int n_max = sampler->n_max();
  std::vector<double> G;
  if (cfg.thick.lattice_normaliser) {
    for (int n = 1; n <= n_max; ++n) G.push_back(sampler->variance(n, 0));
  } else {
    G = continuum_normaliser(spec, cfg.scales);
  }
  const std::size_t A = cfg.a.size();
  // covering[a][r][n - 1], cells[a][r][n - 1]
  std::vector<std::vector<std::vector<double>>> covering(A, std::vector<std::vector<double>>(cfg.replicas));
  std::vector<std::vector<std::vector<std::int64_t>>> cells(A, std::vector<std::vector<std::int64_t>>(cfg.replicas));
  std::vector<std::int64_t> empty(cfg.replicas, 0);
  std::vector<std::vector<double>> sups(cfg.replicas);
  for_replicas(cfg.replicas, [&](int r) {
    const auto f = sampler->sample(cfg.seed, static_cast<std::uint64_t>(r));
    const auto sets = thick_cells(f, G, cfg.a, cfg.thick.cells);
    for (std::size_t i = 0; i < A; ++i) {
      cells[i][r] = sets[i].counts;
      for (int n = 1; n <= n_max; ++n) covering[i][r].push_back(covering_count(sets[i], n, cfg.thick.count));
    }
    if (cfg.thick.empty_check) {
      empty[r] = thick_cells(f, G, cfg.thick.empty_a, cfg.thick.empty_cells).counts[cfg.thick.empty_n - 1];
    }
    sups[r] = sup_normalized(f, G);
  });
  clock.lap("replicas");

  {
    auto os = out.csv("counts.csv", {"a", "replica", "n", "r", "delta", "cells", "covering"});
    const ThickOptions& o = cfg.thick.cells;
    for (std::size_t i = 0; i < A; ++i) {
      for (int r = 0; r < cfg.replicas; ++r) {
        for (int n = 1; n <= n_max; ++n) {
          os << num(cfg.a[i]) << ',' << r << ',' << n << ',' << num(cfg.scales[n - 1]) << ',' << num(o.delta(n)) << ','
             << cells[i][r][n - 1] << ',' << num(covering[i][r][n - 1]) << '\n';
        }
      }
    }
    auto ss = out.csv("sup.csv", {"replica", "n", "sup_ratio"});
    for (int r = 0; r < cfg.replicas; ++r) {
      for (int n = 1; n <= n_max; ++n) ss << r << ',' << n << ',' << num(sups[r][n - 1]) << '\n';
    }
  }

  std::vector<int> window;
  if (cfg.thick.window_lo > 0) {
    for (int n = cfg.thick.window_lo; n <= cfg.thick.window_hi; ++n) window.push_back(n);
  } else {
    window = default_window(n_max);
  }
  std::vector<double> rw;
  for (int n : window) rw.push_back(cfg.scales[n - 1]);
  std::vector<SpectrumPoint> points;
  for (std::size_t i = 0; i < A; ++i) {
    std::vector<std::vector<double>> c(cfg.replicas);
    for (int r = 0; r < cfg.replicas; ++r) {
      for (int n : window) c[r].push_back(covering[i][r][n - 1]);
    }
    points.push_back({cfg.a[i], fit_dimension(rw, c, cfg.a[i], spec.d)});
  }
  const auto spectrum = assemble_spectrum(points);
  auto sp = out.csv("spectrum.csv", {"a", "d_hat", "se", "predicted", "verdict"});
  Json rows = Json::array();
  for (const auto& p : spectrum.points) {
    sp << num(p.a) << ',' << num(p.fit.slope) << ',' << num(p.fit.slope_se) << ',' << num(p.fit.predicted) << ','
       << p.fit.verdict << '\n';
    rows.push_back({{"a", p.a}, {"d_hat", p.fit.slope}, {"se", p.fit.slope_se}, {"predicted", p.fit.predicted},
                    {"verdict", p.fit.verdict}});
  }
  Json summary = {{"family", to_string(spec.family)},
                  {"replicas", cfg.replicas},
                  {"window", window},
                  {"spectrum", rows},
                  {"quadratic", {{"c0", spectrum.c0}, {"c1", spectrum.c1}, {"c2", spectrum.c2}}},
                  {"monotonicity_violations", spectrum.monotonicity_violations},
                  {"worst_violation", spectrum.worst_violation}};
  if (cfg.thick.empty_check) {
    auto es = out.csv("empty.csv", {"replica", "a", "n", "cells"});
    int zero = 0;
    for (int r = 0; r < cfg.replicas; ++r) {
      es << r << ',' << num(cfg.thick.empty_a) << ',' << cfg.thick.empty_n << ',' << empty[r] << '\n';
      if (empty[r] == 0) ++zero;
    }
    summary["empty"] = {{"a", cfg.thick.empty_a}, {"n", cfg.thick.empty_n}, {"empty_replicas", zero},
                        {"replicas", cfg.replicas}};
  }
  clock.lap("fit");
  return summary;
}

// ---------------------------------------------------------------------------

Json run_check(const ExperimentConfig& cfg, OutputSet& out) {
  const auto& c = cfg.check;
  auto os = out.csv("rows.csv", report_columns());
  Json reports = Json::array();
  for (const auto& spec : cfg.cutoffs) {
    for (const auto& id : c.conditions) {
      ConditionReport r;
      if (id == "A") r = check_A(spec, c.eps, c.r, cfg.thresholds);
      if (id == "B") r = check_B(spec, c.b_eps, cfg.thresholds);
      if (id == "C") r = check_C(spec, c.n_max, c.r, c.N_list, cfg.thresholds);
      if (id == "D") r = check_D(spec, c.n_max, c.d_sets, c.d_points, cfg.seed, cfg.thresholds);
      write_rows(os, r);
      reports.push_back(report_json(r));
    }
  }
  out.json("reports.json", reports);
  return {{"reports", reports}};
}

Json run_compare(const ExperimentConfig& cfg, OutputSet& out, Stopwatch& clock) {
  const auto& a = cfg.cutoffs[0];
  const auto& b = cfg.cutoffs[1];
  auto os = out.csv("rows.csv", report_columns());
  Json reports = Json::array();
  for (const auto& r : check_E(a, b, cfg.compare.eps, cfg.compare.r, cfg.thresholds)) {
    write_rows(os, r);
    reports.push_back(report_json(r));
  }
  clock.lap("condition E");
  Json summary;
  if (cfg.compare.max_scaling) {
    const auto m = check_max_scaling(a, b, cfg.scales, cfg.replicas, cfg.seed, cfg.compare.R, cfg.thresholds);
    write_rows(os, m.report);
    reports.push_back(report_json(m.report));
    auto ms = out.csv("max_scaling.csv", {"replica", "eps", "sup"});
    for (int r = 0; r < cfg.replicas; ++r) {
      for (std::size_t i = 0; i < m.eps.size(); ++i) ms << r << ',' << num(m.eps[i]) << ',' << num(m.sups[r][i]) << '\n';
    }
    summary["max_scaling"] = {{"eps", m.eps},
                              {"mean_sup", m.mean_sup},
                              {"ratio", m.ratio},
                              {"spread", m.spread},
                              {"decreasing_fraction", m.decreasing_fraction},
                              {"trend_slope", m.trend_slope},
                              {"pass", m.report.pass}};
    clock.lap("maximum scaling");
  }
  out.json("reports.json", reports);
  summary["reports"] = reports;
  return summary;
}

}  // namespace

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

Json RunManifest::to_json() const {
  Json stages_j = Json::array(), outputs_j = Json::array();
  for (const auto& s : stages) stages_j.push_back({{"stage", s.name}, {"seconds", s.seconds}});
  for (const auto& o : outputs) outputs_j.push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  return {{"version", version}, {"config_hash", config_hash}, {"kind", kind}, {"stages", stages_j},
          {"outputs", outputs_j}, {"fingerprint", fingerprint()}, {"summary", summary}};
}

std::string RunManifest::fingerprint() const {
  std::string s;
  for (const auto& o : outputs) s += o.path + " " + o.sha256 + "\n";
  return sha256_hex(s);
}

OutputSet::OutputSet(std::string directory, std::string config_hash, std::string kind)
    : dir_(std::move(directory)), hash_(std::move(config_hash)), kind_(std::move(kind)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) usage_error("cannot create output directory '" + dir_ + "': " + ec.message());
}

std::string OutputSet::path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

std::ofstream OutputSet::csv(const std::string& name, const std::vector<std::string>& columns) {
  std::ofstream os(path(name), std::ios::binary);
  if (!os) usage_error("cannot write '" + path(name) + "'");
  os << "# thick " << THICK_VERSION << "\n# config_sha256 " << hash_ << "\n# kind " << kind_ << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  add(name);
  return os;
}

void OutputSet::json(const std::string& name, Json value) {
  Json doc = {{"version", THICK_VERSION}, {"config_sha256", hash_}, {"kind", kind_}, {"data", std::move(value)}};
  std::ofstream os(path(name), std::ios::binary);
  if (!os) usage_error("cannot write '" + path(name) + "'");
  os << doc.dump(2) << '\n';
  add(name);
}

void OutputSet::add(const std::string& name) {
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

std::vector<OutputFile> OutputSet::digests() const {
  std::vector<OutputFile> out;
  for (const auto& f : files_) out.push_back({f, sha256_file(path(f)), fs::file_size(path(f))});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

std::string resolve_output(const ExperimentConfig& cfg, const std::string& override_dir) {
  std::string dir = !override_dir.empty() ? override_dir
                    : !cfg.output.empty() ? cfg.output
                                          : to_string(cfg.kind) + "-" + cfg.hash.substr(0, 12);
  const char* root = std::getenv("THICK_OUTPUT_ROOT");
  if (root && *root && fs::path(dir).is_relative()) dir = (fs::path(root) / dir).string();
  return dir;
}

int resolve_threads(const ExperimentConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("THICK_THREADS")) {
    int n = 0;
    const auto res = std::from_chars(env, env + std::char_traits<char>::length(env), n);
    if (res.ec != std::errc() || n < 1) usage_error("THICK_THREADS must be a positive integer");
    return n;
  }
  return omp_get_max_threads();
}

RunManifest run(const ExperimentConfig& cfg_in, const std::string& output_dir) {
  ExperimentConfig cfg;
  const auto report = validate(cfg_in.document, cfg);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    throw Error(v.category, v.field + ": " + v.message);
  }
  omp_set_num_threads(resolve_threads(cfg));

  RunManifest m;
  m.config_hash = cfg.hash;
  m.version = THICK_VERSION;
  m.kind = to_string(cfg.kind);
  m.directory = output_dir;
  OutputSet out(output_dir, cfg.hash, m.kind);
  out.json("config.json", cfg.document);
  Stopwatch clock(m.stages);
  switch (cfg.kind) {
    case Kind::KernelTable: m.summary = run_kernel_table(cfg, out); break;
    case Kind::Sample: m.summary = run_sample(cfg, out, clock); break;
    case Kind::GmcTrace: m.summary = run_gmc(cfg, out, clock); break;
    case Kind::ThickSpectrum: m.summary = run_thick(cfg, out, clock); break;
    case Kind::CheckConditions: m.summary = run_check(cfg, out); break;
    case Kind::CompareCutoffs: m.summary = run_compare(cfg, out, clock); break;
  }
  clock.lap("report");
  out.json("summary.json", m.summary);
  m.outputs = out.digests();
  std::ofstream os(out.path("manifest.json"), std::ios::binary);
  os << m.to_json().dump(2) << '\n';
  return m;
}

}  // namespace thick::app
