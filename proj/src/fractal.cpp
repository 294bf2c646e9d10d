#include "thick/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "thick/errors.hpp"

namespace thick {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_normaliser(const MultiscaleField& field, const std::vector<double>& normaliser) {
  if (static_cast<int>(normaliser.size()) != field.n_max()) usage_error("one normaliser per scale is required");
  for (double g : normaliser) {
    if (!(g > 0.0)) usage_error("normalisers must be positive");
  }
}

bool is_thick(double ratio, double a, double delta, ThickMode mode) {
  if (mode == ThickMode::AtLeast) return ratio >= a - delta;
  return std::abs(ratio - a) <= delta;
}

}  // namespace

double DeltaRule::operator()(int n) const {
  if (zero) return 0.0;
  if (n <= 1) return kInf;
  return C * std::pow(std::log(static_cast<double>(n)), zeta - 1.0);
}

std::vector<double> continuum_normaliser(const CutoffSpec& spec, const std::vector<double>& scales) {
  std::vector<double> g;
  g.reserve(scales.size());
  for (double eps : scales) g.push_back(varG(eps, spec));
  return g;
}

std::vector<ThickCellSets> thick_cells(const MultiscaleField& field, const std::vector<double>& normaliser,
                                       const std::vector<double>& a_grid, const ThickOptions& options) {
  check_normaliser(field, normaliser);
  for (double a : a_grid) {
    if (!(a >= 0.0)) domain_error("thickness level a must be nonnegative");
  }
  const std::size_t cells = field.lattice.size();
  std::vector<ThickCellSets> out(a_grid.size());
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    out[i].lattice = field.lattice;
    out[i].a = a_grid[i];
    out[i].scales = field.scales;
    out[i].normaliser = normaliser;
  }
  std::vector<double> x(cells, 0.0);
  for (int n = 1; n <= field.n_max(); ++n) {
    const auto& y = field.increments[n - 1];
    for (std::size_t c = 0; c < cells; ++c) x[c] += y[c];
    const double delta = options.delta(n);
    const double inv = 1.0 / normaliser[n - 1];
    for (auto& s : out) {
      std::int64_t count = 0;
      std::vector<char> grid;
      if (options.keep_grids) grid.assign(cells, 0);
      for (std::size_t c = 0; c < cells; ++c) {
        if (is_thick(x[c] * inv, s.a, delta, options.mode)) {
          ++count;
          if (options.keep_grids) grid[c] = 1;
        }
      }
      s.delta.push_back(delta);
      s.counts.push_back(count);
      if (options.keep_grids) s.grids.push_back(std::move(grid));
    }
  }
  return out;
}

ThickCellSets thick_cells(const MultiscaleField& field, const std::vector<double>& normaliser, double a,
                          const ThickOptions& options) {
  return std::move(thick_cells(field, normaliser, std::vector<double>{a}, options).front());
}

std::vector<double> sup_normalized(const MultiscaleField& field, const std::vector<double>& normaliser) {
  check_normaliser(field, normaliser);
  std::vector<double> x(field.lattice.size(), 0.0), sup;
  for (int n = 1; n <= field.n_max(); ++n) {
    const auto& y = field.increments[n - 1];
    double m = -kInf;
    for (std::size_t c = 0; c < x.size(); ++c) {
      x[c] += y[c];
      m = std::max(m, x[c]);
    }
    sup.push_back(m / normaliser[n - 1]);
  }
  return sup;
}

std::vector<double> power_scales(int n_max, double K) {
  if (n_max < 1 || !(K > 0.0)) usage_error("power scales need n_max >= 1 and K > 0");
  std::vector<double> r;
  for (int n = 2; n <= n_max + 1; ++n) r.push_back(std::pow(static_cast<double>(n), -K));
  return r;
}

std::int64_t box_count(const std::vector<char>& grid, int N, int box) {
  if (box < 1) usage_error("box size must be at least one cell");
  if (grid.size() != static_cast<std::size_t>(N) * N) usage_error("grid size does not match N");
  const int B = (N + box - 1) / box;
  std::vector<char> hit(static_cast<std::size_t>(B) * B, 0);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      if (grid[static_cast<std::size_t>(j) * N + i]) hit[static_cast<std::size_t>(j / box) * B + i / box] = 1;
    }
  }
  return std::count(hit.begin(), hit.end(), 1);
}

double covering_count(const ThickCellSets& sets, int n, CountMethod method, int d) {
  if (n < 1 || n > static_cast<int>(sets.counts.size())) usage_error("scale index out of range");
  const double r = sets.scales[n - 1];
  if (method == CountMethod::Net) return std::pow(sets.lattice.L / r, d) * sets.fraction(n);
  if (sets.grids.empty()) usage_error("box counting needs the thick grids (keep_grids)");
  const int box = std::max(1, static_cast<int>(std::lround(r / sets.lattice.h())));
  return static_cast<double>(box_count(sets.grids[n - 1], sets.lattice.N, box));
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) usage_error("a line fit needs at least two points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - f.intercept - f.slope * x[i];
      rss += e * e;
    }
    f.slope_se = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

std::vector<int> default_window(int n_max) {
  std::vector<int> w;
  for (int n = 3; n <= n_max - 1; ++n) w.push_back(n);
  return w;
}

DimensionFit fit_dimension(const std::vector<double>& r, const std::vector<std::vector<double>>& counts, double a,
                           int d) {
  DimensionFit fit;
  fit.r = r;
  fit.predicted = d - 0.5 * a * a;
  fit.replicas = static_cast<int>(counts.size());
  if (counts.empty()) usage_error("dimension fit needs at least one replica");
  fit.mean_count.assign(r.size(), 0.0);
  for (const auto& c : counts) {
    if (c.size() != r.size()) usage_error("count table does not match the scale list");
    for (std::size_t i = 0; i < r.size(); ++i) fit.mean_count[i] += c[i] / counts.size();
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (fit.mean_count[i] > 0.0) {
      lx.push_back(std::log(1.0 / r[i]));
      ly.push_back(std::log(fit.mean_count[i]));
    }
  }
  if (lx.empty()) {
    fit.empty = true;
    fit.verdict = "empty set";
    return fit;
  }
  if (lx.size() < 4) {
    fit.verdict = "insufficient scales with nonzero counts";
    return fit;
  }
  const auto line = fit_line(lx, ly);
  fit.slope = line.slope;
  fit.slope_se = line.slope_se;
  // Replica spread of per-replica slopes, when every replica has a full window.
  std::vector<double> slopes;
  if (lx.size() == r.size()) {
    for (const auto& c : counts) {
      std::vector<double> y;
      for (double v : c) {
        if (v <= 0.0) break;
        y.push_back(std::log(v));
      }
      if (y.size() == r.size()) slopes.push_back(fit_line(lx, y).slope);
    }
  }
  if (slopes.size() >= 2) {
    const double m = std::accumulate(slopes.begin(), slopes.end(), 0.0) / slopes.size();
    double s2 = 0.0;
    for (double s : slopes) s2 += (s - m) * (s - m);
    fit.slope_se = std::sqrt(s2 / (slopes.size() - 1) / slopes.size());
  }
  fit.verdict = "fitted";
  return fit;
}

Spectrum assemble_spectrum(std::vector<SpectrumPoint> points) {
  Spectrum s;
  std::sort(points.begin(), points.end(), [](const auto& p, const auto& q) { return p.a < q.a; });
  s.points = std::move(points);
  std::vector<const SpectrumPoint*> fitted;
  for (const auto& p : s.points) {
    if (!p.fit.empty && p.fit.verdict == "fitted") fitted.push_back(&p);
  }
  for (std::size_t i = 1; i < fitted.size(); ++i) {
    const double rise = fitted[i]->fit.slope - fitted[i - 1]->fit.slope;
    if (rise > 0.0) {
      ++s.monotonicity_violations;
      s.worst_violation = std::max(s.worst_violation, rise);
    }
  }
  if (fitted.size() >= 3) {
    Eigen::MatrixXd A(fitted.size(), 3);
    Eigen::VectorXd b(fitted.size());
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      const double a = fitted[i]->a;
      A.row(static_cast<Eigen::Index>(i)) << 1.0, a, a * a;
      b(static_cast<Eigen::Index>(i)) = fitted[i]->fit.slope;
    }
    const Eigen::Vector3d c = A.colPivHouseholderQr().solve(b);
    s.c0 = c(0);
    s.c1 = c(1);
    s.c2 = c(2);
  }
  return s;
}

double borel_cantelli_tail(double a, int d, double chi, int n_min) {
  if (!(chi > 0.0) || n_min < 1) usage_error("Borel-Cantelli tail needs chi > 0 and n_min >= 1");
  const double p = a * a / (2.0 * chi) - d * (1.0 + 1.0 / chi);
  if (p <= 1.0) return kInf;
  // Partial sum plus the integral bound for the remainder.
  double s = 0.0;
  const int cut = n_min + 100000;
  for (int n = n_min; n < cut; ++n) s += std::pow(static_cast<double>(n), -p);
  return s + std::pow(static_cast<double>(cut), 1.0 - p) / (p - 1.0);
}

std::vector<char> fixture_square(int N) { return std::vector<char>(static_cast<std::size_t>(N) * N, 1); }

std::vector<char> fixture_segment(int N) {
  std::vector<char> g(static_cast<std::size_t>(N) * N, 0);
  for (int i = 0; i < N; ++i) g[static_cast<std::size_t>(N / 2) * N + i] = 1;
  return g;
}

std::vector<char> fixture_cantor_dust(int N) {
  auto in_cantor = [](int i) {
    for (; i > 0; i /= 3) {
      if (i % 3 == 1) return false;
    }
    return true;
  };
  std::vector<char> g(static_cast<std::size_t>(N) * N, 0);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) g[static_cast<std::size_t>(j) * N + i] = in_cantor(i) && in_cantor(j);
  }
  return g;
}

}  // namespace thick
