#pragma once

// Multiscale samplers for the cut-off families.
//
// Every sampler is built once (all generator weights are precomputed) and then
// produces replicas as pure functions of (seed, replica). The weights also give
// the exact covariance of the sampled field, which is what the GMC module
// normalises with.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thick/kernels.hpp"
#include "thick/rng.hpp"

namespace thick {

/// N x N lattice with points offset + (i h, j h), h = L / N.
/// Point (i, j) is stored at index j * N + i.
struct LatticeSpec {
  int N = 64;
  double L = 1.0;
  Point offset{};

  double h() const { return L / N; }
  std::size_t size() const { return static_cast<std::size_t>(N) * N; }
  Point point(std::size_t index) const {
    return {offset.x + static_cast<double>(index % N) * h(), offset.y + static_cast<double>(index / N) * h()};
  }
  void validate() const;

  /// Cell-centred lattice covering D^(margin) of the unit square.
  static LatticeSpec interior(int N, double margin);
};

enum class Coupling {
  IndependentIncrements,  // X_n = sum_{k<=n} Y_k with independent Y_k
  SharedModes,            // every level is a function of one mode-Gaussian vector
};

/// Jointly sampled levels X_1..X_n on one lattice, stored as increments.
struct MultiscaleField {
  LatticeSpec lattice;
  std::vector<double> scales;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  Coupling coupling = Coupling::IndependentIncrements;
  std::vector<std::vector<double>> increments;  // Y_k, k = 1..n_max

  int n_max() const { return static_cast<int>(increments.size()); }
  /// X_n as the prefix sum Y_1 + ... + Y_n (zero field for n = 0).
  std::vector<double> at_scale(int n) const;
};

/// Flat binary snapshot: magic "THKF", u32 version, u32 N, f64 L, u32 n_max, u64 seed,
/// then n_max row-major f64 grids of X_n.
void write_snapshot(const std::string& path, const MultiscaleField& field);
MultiscaleField read_snapshot(const std::string& path);
/// CSV with columns i, j, x, y, X_1..X_n.
void write_field_csv(const std::string& path, const MultiscaleField& field);

class FieldSampler {
 public:
  virtual ~FieldSampler() = default;

  virtual MultiscaleField sample(std::uint64_t seed, std::uint64_t replica) const = 0;

  const LatticeSpec& lattice() const { return lattice_; }
  const std::vector<double>& scales() const { return scales_; }
  int n_max() const { return static_cast<int>(scales_.size()); }
  virtual Coupling coupling() const { return Coupling::IndependentIncrements; }

  /// Exact covariance E[X_j(a) X_k(b)] implied by the generator weights (levels 0..n_max).
  virtual double covariance(int j, int k, std::size_t a, std::size_t b) const = 0;
  /// Exact Var X_n at a cell (default: covariance(n, n, cell, cell)).
  virtual double variance(int n, std::size_t cell) const;
  /// Exact Var Y_k at a cell. Independent-increment samplers compute it from the
  /// level-k weights alone, so it is an independent check on Var X_k - Var X_{k-1}.
  virtual double increment_variance(int k, std::size_t cell) const;
  /// True when Var X_n does not depend on the cell.
  virtual bool uniform_variance() const { return false; }
  /// Exact Var(X_j(a) - X_k(a)).
  double difference_variance(int j, int k, std::size_t cell) const;

 protected:
  FieldSampler(LatticeSpec lattice, std::vector<double> scales);
  LatticeSpec lattice_;
  std::vector<double> scales_;
};

/// Frequency lattice (2 pi / L) Z^2 of an N x N torus lattice, in FFTW's
/// half-complex layout, with synthesis of real fields from per-mode amplitudes.
class SpectralLattice {
 public:
  /// One entry per conjugate pair {xi, -xi} (or per self-conjugate mode).
  struct Mode {
    int kx = 0, ky = 0;  // canonical integer frequency (kx > 0, or kx in {0, N/2} and ky > 0)
    std::size_t slot = 0;
    std::size_t partner = npos;  // stored slot of -xi when it is also stored
    bool self_conjugate = false;
    std::uint64_t key = 0;  // RNG counter, a function of (kx, ky) only
  };
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit SpectralLattice(const LatticeSpec& lattice);
  ~SpectralLattice();
  SpectralLattice(const SpectralLattice&) = delete;
  SpectralLattice& operator=(const SpectralLattice&) = delete;

  const LatticeSpec& lattice() const { return lattice_; }
  const std::vector<Mode>& modes() const { return modes_; }
  double dxi() const { return dxi_; }
  double radius(const Mode& mode) const;
  /// Number of lattice cells the mode stands for (2 for a pair, 1 if self-conjugate).
  static double multiplicity(const Mode& mode) { return mode.self_conjugate ? 1.0 : 2.0; }

  /// Integral of f(|xi|) over the frequency cell of the mode. `radii` lists circles
  /// across which f may jump; cells cut by one are integrated adaptively.
  double cell_integral(const Mode& mode, const std::function<double(double)>& f,
                       const std::vector<double>& radii = {}, int nodes = 4) const;

  /// Real field sum_modes amp_i (A_i cos + B_i sin) with (A_i, B_i) from `stream`, so that
  /// its covariance is sum_i amp_i^2 cos(xi_i . (x - y)). The amplitude vector may carry
  /// a sign; `amp` is indexed like modes().
  std::vector<double> synthesize(const std::vector<double>& amp, const NormalStream& stream) const;
  /// Several amplitude vectors sharing one Gaussian vector, one FFT each.
  std::vector<std::vector<double>> synthesize_shared(const std::vector<std::vector<double>>& amps,
                                                     const NormalStream& stream) const;
  /// sum_i amp_a_i amp_b_i cos(xi_i . (x_a - x_b)) for lattice cells a, b: the cross
  /// covariance of two syntheses from the same Gaussians.
  double covariance(const std::vector<double>& amp_a, const std::vector<double>& amp_b, std::size_t a,
                    std::size_t b) const;

 private:
  std::vector<double> transform(std::vector<double>& half_complex) const;

  LatticeSpec lattice_;
  double dxi_;
  std::vector<Mode> modes_;
  struct Plan;
  std::unique_ptr<Plan> plan_;
};

struct SpectralOptions {
  /// Largest allowed share of Var X_n lost beyond the lattice's frequency square
  /// (mollified family only; the truncated family must fit exactly).
  double max_tail_fraction = 0.01;
};

/// Torus sampler for the white-noise and mollified families (d = 2), via FFTW.
/// White noise: level k collects the frequency cells (exactly integrated) inside the
/// annulus 1/eps_{k-1} < |xi| <= 1/eps_k, each annulus piece with its own Gaussians.
/// Mollified: every level reweights all modes of one shared Gaussian vector.
class SpectralSampler final : public FieldSampler {
 public:
  SpectralSampler(const CutoffSpec& spec, const LatticeSpec& lattice, std::vector<double> scales,
                  SpectralOptions options = {});

  MultiscaleField sample(std::uint64_t seed, std::uint64_t replica) const override;
  Coupling coupling() const override;
  double covariance(int j, int k, std::size_t a, std::size_t b) const override;
  double variance(int n, std::size_t cell) const override;
  double increment_variance(int k, std::size_t cell) const override;
  bool uniform_variance() const override { return true; }

  const CutoffSpec& spec() const { return spec_; }
  const SpectralLattice& spectral_lattice() const { return *grid_; }
  /// Var X_n / varG(eps_n) - 1.
  double variance_bias(int n) const;

  /// Highest e-fold the lattice resolves for the truncated family: floor(log(pi (N-1) / L)).
  static int max_resolved_level(const LatticeSpec& lattice);
  /// Smallest even N resolving |xi| <= 1/eps on a torus of side L.
  static int required_N(double eps, double L);

 private:
  CutoffSpec spec_;
  std::unique_ptr<SpectralLattice> grid_;
  std::vector<std::vector<double>> amp_;  // per level k: increment (or level) amplitudes
  std::vector<double> level_variance_;    // index 0..n_max
};

/// Sine-basis sampler of the semigroup cut-off on the unit square (d = 2).
class GffSineSampler final : public FieldSampler {
 public:
  /// modes <= 0 selects the smallest M meeting the 1% tail rule at the finest scale.
  GffSineSampler(const LatticeSpec& lattice, std::vector<double> scales, int modes = 0, double margin = 0.2);

  MultiscaleField sample(std::uint64_t seed, std::uint64_t replica) const override;
  double covariance(int j, int k, std::size_t a, std::size_t b) const override;
  double variance(int n, std::size_t cell) const override;
  double increment_variance(int k, std::size_t cell) const override;

  int modes() const { return M_; }
  /// Upper bound on the eigen-sum variance dropped by truncating at M modes per axis.
  static double tail_bound(double eps, int M);
  /// Smallest M with tail_bound(eps, M) <= fraction * (-log eps).
  static int required_modes(double eps, double fraction = 0.01);

 private:
  Eigen::MatrixXd level_weight2(int n) const;  // 2 pi e^{-lambda eps_n} / lambda, M x M
  int M_;
  Eigen::MatrixXd sx_, sy_;                    // sin(pi j x) at lattice abscissae / ordinates
  std::vector<Eigen::MatrixXd> weights_;       // per level k: M x M increment weights
  std::vector<std::vector<double>> variance_;  // per level n (0..n_max): per-cell exact variance
};

/// Symmetric square root of a PSD Gram matrix with eigenvalue clipping.
struct PsdFactor {
  Eigen::MatrixXd root;      // root * root^T = clipped Gram
  double min_eigenvalue = 0; // before clipping
  double max_eigenvalue = 0;
  double clipped = 0;        // sum of |negative eigenvalues| that were set to zero

  /// Throws a numerical error "kernel not PSD at tolerance" if the smallest eigenvalue
  /// is below -rel_tol * max eigenvalue.
  static PsdFactor compute(const Eigen::MatrixXd& gram, double rel_tol = 1e-6);
};

/// Dense per-scale sampler for the massive integral family (at most 4096 points).
class IntegralFamilySampler final : public FieldSampler {
 public:
  IntegralFamilySampler(const CutoffSpec& spec, const LatticeSpec& lattice, std::vector<double> scales);

  MultiscaleField sample(std::uint64_t seed, std::uint64_t replica) const override;
  double covariance(int j, int k, std::size_t a, std::size_t b) const override;
  double increment_variance(int k, std::size_t cell) const override;

  /// Total clipped eigenvalue mass per level k (reported, usually ~1e-12).
  const std::vector<double>& clipped() const { return clipped_; }

 private:
  ScaleDecomposition dec_;
  std::vector<Eigen::MatrixXd> factors_;
  std::vector<double> clipped_;
};

/// Builds the sampler matching the family.
std::unique_ptr<FieldSampler> make_sampler(const CutoffSpec& spec, const LatticeSpec& lattice,
                                           const std::vector<double>& scales);

/// Exact draw of a centred Gaussian vector with covariance kernel(p_i, p_j) (at most 2048 points).
std::vector<double> sample_exact(const std::function<double(Point, Point)>& kernel, const std::vector<Point>& points,
                                 std::uint64_t seed, std::uint64_t replica = 0);

/// e-fold scale list eps_k = e^{-k}, k = 1..n_max.
std::vector<double> efold_scales(int n_max);

}  // namespace thick
