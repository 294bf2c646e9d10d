#pragma once

// Numerical audit of the sufficient conditions (A)-(E) and of the maximum-scaling bound.
//
// Every condition is reduced to a dimensionless ratio evaluated over a declared probe
// family. A report carries the worst ratio, the fitted constants, the per-probe rows
// and a pass flag against configurable thresholds.

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "thick/fields.hpp"
#include "thick/kernels.hpp"

namespace thick {

struct ProbeRow {
  Point x, y;
  double eps = std::numeric_limits<double>::quiet_NaN();
  double eta = std::numeric_limits<double>::quiet_NaN();
  int n = 0, k = 0;
  double value = 0.0;  // the audited moment
  double ratio = 0.0;  // its dimensionless normalisation
};

struct ConditionReport {
  std::string id;      // A, B, C, C', D, E-var, E-incr, MaxScaling
  std::string family;  // family or "familyA vs familyB"
  std::string probes;  // human-readable description of the probe family
  std::vector<std::pair<std::string, double>> constants;
  double worst_ratio = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
  bool pass = false;
  bool applicable = true;
  std::string status;
  std::string argmax;
  std::vector<ProbeRow> rows;

  /// Value of a named constant; throws a usage error if absent.
  double constant(const std::string& name) const;
};

struct Thresholds {
  double b_tolerance = 0.05;      // |varG / (-log eps) - 1| at eps <= b_eps
  double b_eps = 1e-4;
  double psd_relative = 1e-8;     // Gram min eigenvalue >= -psd_relative * max eigenvalue
  double d_terminal = 0.05;       // |q_n(x,x) / n - 1| at n_max
  double trend_slope = 0.02;      // slopes of Var Z and of E[sup Z] / sqrt(-log eps) against -log eps
  double refinement_change = 0.1; // relative change of a sup-constant when probe density doubles
  double max_ratio_spread = 0.25; // max / min - 1 of E[sup Z] / sqrt(-log eps)
  double decreasing_fraction = 0.9;
};

/// Logarithmically spaced grid lo..hi with `points` values.
struct LogGrid {
  double lo = 1e-4, hi = 1e-1;
  int points = 7;

  std::vector<double> values() const;
  /// Twice the probe density: the old points plus every geometric midpoint.
  LogGrid refined() const { return {lo, hi, 2 * points - 1}; }
};

/// E[X_eps(x) X_eta(y)] under the family's joint coupling across scales:
/// nested cut-offs for the truncated, integral and semigroup families, shared modes for
/// the mollified family.
double joint_covariance(const CutoffSpec& spec, Point x, Point y, double eps, double eta);

/// Pair of points at distance r, placed inside the family's probe domain.
std::pair<Point, Point> probe_pair(const CutoffSpec& spec, double r);
/// Largest separation probe_pair can place.
double max_probe_separation(const CutoffSpec& spec);

ConditionReport check_A(const CutoffSpec& spec, const LogGrid& eps = {1e-4, 1e-1, 7},
                        const LogGrid& r = {1e-4, 1.0, 9}, const Thresholds& t = {});
ConditionReport check_B(const CutoffSpec& spec, const std::vector<double>& eps, const Thresholds& t = {});
/// Reports two constants: sup_H_U (q_n - log 1/r) and C' (q_k - q_N - log 1/r + N, r <= e^{-N}).
ConditionReport check_C(const CutoffSpec& spec, int n_max, const LogGrid& r = {1e-4, 1.0, 9},
                        const std::vector<int>& N_list = {1, 2, 3, 4}, const Thresholds& t = {});
ConditionReport check_D(const CutoffSpec& spec, int n_max, int sets = 10, int points = 20, std::uint64_t seed = 1,
                        const Thresholds& t = {});

/// Shared-mode difference Z_eps = X_eps - X~_eps of a truncated and a mollified cut-off
/// built from the same white noise (or of two identical cut-offs, where Z = 0).
struct ModeCoupling {
  CutoffSpec truncated;
  Mollifier mollifier;
  bool zero = false;

  /// Throws a usage error "no coupling defined" unless the pair shares modes.
  static ModeCoupling make(const CutoffSpec& a, const CutoffSpec& b);
  std::string name() const;
  double covariance(double r, double eps) const;  // Cov(Z_eps(x), Z_eps(x + r))
  double variance(double eps) const { return covariance(0.0, eps); }
  /// (1_{t <= 1/eps} - theta_hat(eps t))^2 rho(t), the spectral density of Z_eps at |xi| = t.
  double density(double t, double eps) const;
};

/// Reports E-var (sup Var Z and its trend) and E-incr (sup eps E[(Z(x) - Z(y))^2] / r).
std::vector<ConditionReport> check_E(const CutoffSpec& a, const CutoffSpec& b, const LogGrid& eps = {1e-4, 1e-1, 7},
                                     const LogGrid& r = {1e-4, 1.0, 9}, const Thresholds& t = {});

/// Independent periodic tiles of side <= 1024 cells covering a square of side R, lattice
/// spacing ~ eps, each tile a spectral synthesis of Z_eps with its own Gaussians.
class ZTileSampler {
 public:
  ZTileSampler(const ModeCoupling& coupling, double eps, double R, int max_tile = 1024);

  int tiles_per_side() const { return tiles_; }
  const LatticeSpec& tile() const { return grid_->lattice(); }
  /// Variance of one lattice value (sum of squared amplitudes).
  double lattice_variance() const { return variance_; }
  /// max over all tiles of Z_eps for replica `replica`; `stream_base` separates eps levels.
  double sup(std::uint64_t seed, std::uint64_t replica, std::uint32_t stream_base) const;
  /// One tile's field (for tests).
  std::vector<double> tile_field(std::uint64_t seed, std::uint64_t replica, std::uint32_t stream) const;

 private:
  double eps_;
  int tiles_;
  std::unique_ptr<SpectralLattice> grid_;
  std::vector<double> amp_;
  double variance_ = 0.0;
};

struct MaxScalingResult {
  ConditionReport report;
  std::vector<double> eps;
  std::vector<std::vector<double>> sups;  // [replica][eps index]
  std::vector<double> mean_sup, ratio;    // E[sup Z], E[sup Z] / sqrt(-log eps)
  double spread = 0.0;                    // max ratio / min ratio - 1
  double decreasing_fraction = 0.0;       // replicas with sup / (-log eps) strictly decreasing
  double trend_slope = 0.0;
};

MaxScalingResult check_max_scaling(const CutoffSpec& a, const CutoffSpec& b, const std::vector<double>& eps,
                                   int replicas, std::uint64_t seed, double R = 0.5, const Thresholds& t = {});

}  // namespace thick
