#pragma once

// Thick-cell sets across scales and box-counting dimension estimates.

#include <cstdint>
#include <string>
#include <vector>

#include "thick/fields.hpp"

namespace thick {

/// delta(n) = C (log n)^(zeta - 1); infinite at n = 1. `zero` switches the rule off.
struct DeltaRule {
  double C = 1.0;
  double zeta = 0.5;
  bool zero = false;

  double operator()(int n) const;
  static DeltaRule none() { return {1.0, 0.5, true}; }
};

enum class ThickMode {
  AtLeast,  // X / G >= a - delta(n)
  Band,     // |X / G - a| <= delta(n)
};

struct ThickOptions {
  DeltaRule delta{};
  ThickMode mode = ThickMode::AtLeast;
  bool keep_grids = true;
};

/// Per scale n: A_n as a cell mask plus its count. G_n is the normaliser of X at scale n.
struct ThickCellSets {
  LatticeSpec lattice;
  double a = 0.0;
  std::vector<double> scales;     // r_n
  std::vector<double> normaliser; // G(r_n)
  std::vector<double> delta;      // delta(n)
  std::vector<std::vector<char>> grids;
  std::vector<std::int64_t> counts;

  double fraction(int n) const { return static_cast<double>(counts.at(n - 1)) / static_cast<double>(lattice.size()); }
};

/// Continuum variances varG(r_n) for the scale list.
std::vector<double> continuum_normaliser(const CutoffSpec& spec, const std::vector<double>& scales);

ThickCellSets thick_cells(const MultiscaleField& field, const std::vector<double>& normaliser, double a,
                          const ThickOptions& options = {});

/// Thick sets for several thresholds from one pass over the levels.
std::vector<ThickCellSets> thick_cells(const MultiscaleField& field, const std::vector<double>& normaliser,
                                       const std::vector<double>& a_grid, const ThickOptions& options = {});

/// Per scale max_x X_n(x) / G_n.
std::vector<double> sup_normalized(const MultiscaleField& field, const std::vector<double>& normaliser);

/// Scale grid r_n = n^{-K}, n = 1..n_max (r_1 = 1 is dropped, so the list starts at 2^{-K}).
std::vector<double> power_scales(int n_max, double K);

/// Number of boxes of `box` x `box` cells meeting the set (the last partial row/column counts as a box).
std::int64_t box_count(const std::vector<char>& grid, int N, int box);

enum class CountMethod {
  Net,  // (L / r_n)^d times the thick fraction of the lattice
  Box,  // boxes of side ~ r_n meeting A_n
};

/// Covering count of A_n at resolution r_n.
double covering_count(const ThickCellSets& sets, int n, CountMethod method, int d = 2);

struct DimensionFit {
  std::vector<double> r;           // fit window scales
  std::vector<double> mean_count;  // replica mean of the covering count
  double slope = 0.0;              // d-hat
  double slope_se = 0.0;           // from the spread of per-replica slopes
  double predicted = 0.0;          // d - a^2 / 2
  int replicas = 0;
  bool empty = false;              // every count in the window was zero
  std::string verdict;
};

/// Least-squares slope of log(mean count) against log(1/r). `counts[replica][i]` pairs with r[i].
DimensionFit fit_dimension(const std::vector<double>& r, const std::vector<std::vector<double>>& counts, double a,
                           int d = 2);

/// Default fit window: all scales except the two coarsest and the finest.
std::vector<int> default_window(int n_max);

struct SpectrumPoint {
  double a = 0.0;
  DimensionFit fit;
};

struct Spectrum {
  std::vector<SpectrumPoint> points;
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;  // quadratic fit d-hat(a) = c0 + c1 a + c2 a^2
  int monotonicity_violations = 0;
  double worst_violation = 0.0;
};

/// Quadratic regression and monotonicity diagnostics of per-a fits.
Spectrum assemble_spectrum(std::vector<SpectrumPoint> points);

/// Ordinary least squares slope and intercept of y against x, with the slope's standard error.
struct LineFit {
  double slope = 0.0, intercept = 0.0, slope_se = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Borel-Cantelli tail sum_{n >= n_min} n^{-(a^2 / (2 chi) - d (1 + 1 / chi))}; infinite if divergent.
double borel_cantelli_tail(double a, int d, double chi, int n_min);

/// Deterministic fixtures on a 3^k grid: full square, axis segment, Cantor dust product.
std::vector<char> fixture_square(int N);
std::vector<char> fixture_segment(int N);
std::vector<char> fixture_cantor_dust(int N);

}  // namespace thick
