#pragma once

// Covariance kernels of the cut-off families, the special functions they are
// built from, and the diagonal variance laws G(eps).
//
// Conventions used throughout:
//   * spectral density rho(xi) = <xi>_m^{-d} / omega_d with <xi>_m = sqrt(m^2 + |xi|^2)
//     and omega_d = 2 pi^{d/2} / Gamma(d/2) (surface area of S^{d-1}), so that
//     the truncated white-noise variance grows like -log eps;
//   * the Dirichlet heat kernel on [0,1]^2 is that of Brownian motion with
//     generator Laplacian/2: lambda_jk = pi^2 (j^2 + k^2) / 2,
//     phi_jk(x) = 2 sin(pi j x1) sin(pi k x2).

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace thick {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

enum class Family { WhiteNoise, Mollified, MassiveIntegral, GffSemigroup };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

enum class MollifierKind { Gaussian, Sphere };

/// Radial mollifier described by its Fourier transform theta_hat(k), with
/// theta_hat(0) = 1 and |theta_hat| <= 1.
///   Gaussian: theta = centred Gaussian density of std `width`, theta_hat(k) = exp(-width^2 k^2 / 2)
///   Sphere:   theta = normalised surface measure of the sphere of radius `width`
///             (circle average in d = 2), theta_hat(k) = Gamma(d/2) (2/(w k))^{d/2-1} J_{d/2-1}(w k)
struct Mollifier {
  MollifierKind kind = MollifierKind::Gaussian;
  double width = 1.0;

  double fourier(double k, int d) const;
  std::string id() const;
};

struct TorusDomain {
  double side = 1.0;
};

/// The unit square D = (0,1)^2, with condition checks restricted to
/// D^(margin) = { x : dist(x, boundary) > margin }.
struct UnitSquareDomain {
  double margin = 0.1;
};

using Domain = std::variant<TorusDomain, UnitSquareDomain>;

struct CutoffSpec {
  Family family = Family::WhiteNoise;
  int d = 2;
  double m = 1.0;
  std::optional<Mollifier> mollifier;
  Domain domain = TorusDomain{};

  /// Throws a usage error naming the first violated invariant.
  void validate() const;

  static CutoffSpec white_noise(double m = 1.0, int d = 2, double torus_side = 1.0);
  static CutoffSpec mollified(Mollifier moll, double m = 1.0, int d = 2, double torus_side = 1.0);
  static CutoffSpec massive_integral(double m = 1.0, int d = 2);
  static CutoffSpec gff_semigroup(double margin = 0.2);
};

/// omega_d = 2 pi^{d/2} / Gamma(d/2).
double omega(int d);

/// Modified Bessel function of the second kind, orders 0 and 1.
double bessel_k(int order, double z);

/// k_m(z) = 1/2 int_0^inf exp(-m^2 z^2 / (2v) - v/2) dv = m z K_1(m z), k_m(0) = 1.
double k_m(double z, double m);

/// Integral cut-off H_eps(x,y) = int_1^{1/eps} k_m(u r) du/u = K_0(m r) - K_0(m r / eps)
/// for r > 0 and log(1/eps) on the diagonal.
double kernel_H(double r, double eps, double m);
double kernel_H(Point x, Point y, double eps, double m);

/// Radial spectral integral
///   int_{t0}^{t1} Omega_d(r t) w(t) t^{d-1} (m^2 + t^2)^{-d/2} dt
/// with Omega_d(s) = Gamma(d/2) (2/s)^{d/2-1} J_{d/2-1}(s) (Omega_d(0) = 1), i.e.
/// omega_d^{-1} times the d-dimensional integral over the shell t0 < |xi| <= t1.
/// `weight` multiplies the density (theta_hat^2 for a mollified covariance)
/// and may be empty (w = 1); `weight_freq` is the angular frequency at
/// which the weight itself oscillates (0 if it does not), used to size panels.
double spectral_shell(double r, double t0, double t1, int d, double m,
                      const std::function<double(double)>& weight = {}, double weight_freq = 0.0);

/// White-noise (ball-truncated) or mollified spectral covariance K_eps(r).
double kernel_K(double r, double eps, const CutoffSpec& spec);

/// Integral over all of R^d of a weighted spectral density, truncated where the
/// mollifier weight has decayed: |xi| <= 7.5/(w eps_min) for the Gaussian,
/// 400/(w eps_min) for the sphere average plus a period-averaged tail at r = 0.
/// `weight` must be built from theta_hat at scales in [eps_min, eps_max]
/// (eps_max <= 0 means eps_max = eps_min); eps_max sets the panel width.
double spectral_full(double r, int d, double m, const Mollifier& moll, double eps_min,
                     const std::function<double(double)>& weight, double eps_max = 0.0);

/// Smallest M with the tail of the heat-kernel eigen-sum below `tol`.
int heat_kernel_modes(double t, double tol = 1e-10);

/// Dirichlet heat kernel p_D(t, x, y) on (0,1)^2; modes <= 0 selects M automatically.
double heat_kernel_D(double t, Point x, Point y, int modes = 0);

/// Modes needed for G_{eps,D} so the eigen-sum tail is below `tol`.
int semigroup_modes(double eps, double tol = 1e-10);

/// G_{eps,D}(x,y) = 2 pi int_eps^inf p_D(s,x,y) ds (termwise in the eigenbasis).
double kernel_G_semigroup(Point x, Point y, double eps, int modes = 0);

/// Diagonal variance G(eps) of the family. For GffSemigroup the value depends
/// on the point (default: centre of the square).
double varG(double eps, const CutoffSpec& spec, Point x = {0.5, 0.5});

/// Canonical decomposition q_n = sum_{k <= n} p_k over a decreasing scale list
/// eps_1 > eps_2 > ... (eps_0 is implicit: |xi| <= 1/eps_1, u in [1, 1/eps_1],
/// time in [eps_1, inf)).
class ScaleDecomposition {
 public:
  ScaleDecomposition(CutoffSpec spec, std::vector<double> scales);

  /// e-fold grid eps_k = e^{-k}, k = 1..n_max.
  static ScaleDecomposition efolds(const CutoffSpec& spec, int n_max);

  const CutoffSpec& spec() const { return spec_; }
  const std::vector<double>& scales() const { return scales_; }
  int size() const { return static_cast<int>(scales_.size()); }

  /// p_k(x,y), k = 1..size().
  double p(int k, Point x, Point y) const;
  /// q_n(x,y) = sum_{k<=n} p_k(x,y), computed directly (not by summation).
  double q(int n, Point x, Point y) const;

 private:
  double level(int n, Point x, Point y) const;  // covariance of X at eps_n (n = 0 -> 0)

  CutoffSpec spec_;
  std::vector<double> scales_;
};

/// Hook for non-fatal diagnostics (points outside D^(delta) and the like).
void set_warning_sink(std::function<void(const std::string&)> sink);
void warn(const std::string& message);

}  // namespace thick
