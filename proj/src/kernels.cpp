#include "thick/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include "thick/errors.hpp"
#include "thick/quadrature.hpp"

namespace thick {

namespace {

constexpr double kPi = std::numbers::pi;

std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& m) {
    std::cerr << "warning: " << m << '\n';
  };
  return sink;
}

std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}

// Omega_d(s): average of cos(<s e, u>) over the unit sphere.
double sphere_average_cos(double s, int d) {
  if (s == 0.0) return 1.0;
  if (d == 2) return std::cyl_bessel_j(0.0, s);
  if (d == 3) return std::sin(s) / s;
  const double nu = 0.5 * d - 1.0;
  return std::tgamma(0.5 * d) * std::pow(2.0 / s, nu) * std::cyl_bessel_j(nu, s);
}

double spectral_density_radial(double t, int d, double m) {
  // t^{d-1} (m^2 + t^2)^{-d/2}, written to stay finite for large t.
  const double q = t / std::sqrt(m * m + t * t);
  return std::pow(q, d - 1) / std::sqrt(m * m + t * t);
}

bool inside_margin(Point p, double margin) {
  return p.x > margin && p.x < 1.0 - margin && p.y > margin && p.y < 1.0 - margin;
}

void check_semigroup_points(const CutoffSpec& spec, Point x, Point y) {
  const auto* sq = std::get_if<UnitSquareDomain>(&spec.domain);
  if (sq == nullptr) return;
  if (!inside_margin(x, sq->margin) || !inside_margin(y, sq->margin)) {
    std::ostringstream msg;
    msg << "semigroup kernel evaluated outside D^(" << sq->margin << ") at (" << x.x << "," << x.y << "), ("
        << y.x << "," << y.y << ")";
    warn(msg.str());
  }
}

// Upper truncation of a mollified spectral integral at scale eps.
double mollifier_cutoff(const Mollifier& moll, double eps) {
  switch (moll.kind) {
    case MollifierKind::Gaussian: return 7.5 / (moll.width * eps);
    case MollifierKind::Sphere: return 400.0 / (moll.width * eps);
  }
  return 0.0;
}

}  // namespace

void set_warning_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard lock(warning_mutex());
  warning_sink() = std::move(sink);
}

void warn(const std::string& message) {
  std::lock_guard lock(warning_mutex());
  if (warning_sink()) warning_sink()(message);
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string to_string(Family f) {
  switch (f) {
    case Family::WhiteNoise: return "white-noise";
    case Family::Mollified: return "mollified";
    case Family::MassiveIntegral: return "massive-integral";
    case Family::GffSemigroup: return "gff-semigroup";
  }
  return "unknown";
}

Family family_from_string(const std::string& s) {
  if (s == "white-noise") return Family::WhiteNoise;
  if (s == "mollified") return Family::Mollified;
  if (s == "massive-integral") return Family::MassiveIntegral;
  if (s == "gff-semigroup") return Family::GffSemigroup;
  usage_error("unknown cut-off family '" + s +
              "' (expected white-noise, mollified, massive-integral or gff-semigroup)");
}

double Mollifier::fourier(double k, int d) const {
  const double s = width * k;
  switch (kind) {
    case MollifierKind::Gaussian: return std::exp(-0.5 * s * s);
    case MollifierKind::Sphere: return sphere_average_cos(s, d);
  }
  return 0.0;
}

std::string Mollifier::id() const { return kind == MollifierKind::Gaussian ? "gaussian" : "sphere"; }

void CutoffSpec::validate() const {
  if (d < 2) usage_error("cutoff.d must be >= 2");
  if (family == Family::GffSemigroup) {
    if (d != 2) usage_error("cutoff.d must be 2 for gff-semigroup");
    const auto* sq = std::get_if<UnitSquareDomain>(&domain);
    if (sq == nullptr) usage_error("gff-semigroup requires the unit-square domain");
    if (!(sq->margin > 0.0 && sq->margin < 0.5)) usage_error("cutoff.domain.margin must lie in (0, 1/2)");
  } else {
    if (!(m > 0.0) || !std::isfinite(m)) usage_error("cutoff.m must be positive for massive families");
    if (const auto* t = std::get_if<TorusDomain>(&domain); t != nullptr && !(t->side > 0.0)) {
      usage_error("cutoff.domain.torus side must be positive");
    }
  }
  if ((family == Family::Mollified) != mollifier.has_value()) {
    usage_error("cutoff.mollifier must be present exactly when family = mollified");
  }
  if (mollifier && !(mollifier->width > 0.0)) usage_error("cutoff.mollifier.width must be positive");
}

CutoffSpec CutoffSpec::white_noise(double m, int d, double torus_side) {
  return CutoffSpec{Family::WhiteNoise, d, m, std::nullopt, TorusDomain{torus_side}};
}

CutoffSpec CutoffSpec::mollified(Mollifier moll, double m, int d, double torus_side) {
  return CutoffSpec{Family::Mollified, d, m, moll, TorusDomain{torus_side}};
}

CutoffSpec CutoffSpec::massive_integral(double m, int d) {
  return CutoffSpec{Family::MassiveIntegral, d, m, std::nullopt, TorusDomain{1.0}};
}

CutoffSpec CutoffSpec::gff_semigroup(double margin) {
  return CutoffSpec{Family::GffSemigroup, 2, 0.0, std::nullopt, UnitSquareDomain{margin}};
}

double omega(int d) { return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d); }

double bessel_k(int order, double z) {
  if (order != 0 && order != 1) usage_error("bessel_k supports orders 0 and 1 only");
  if (!(z > 0.0)) domain_error("bessel_k requires z > 0");
  if (z > 700.0) return 0.0;
  return std::cyl_bessel_k(static_cast<double>(order), z);
}

double k_m(double z, double m) {
  if (z < 0.0 || !(m > 0.0)) domain_error("k_m requires z >= 0 and m > 0");
  const double a = m * z;
  if (a == 0.0) return 1.0;
  if (a > 700.0) return 0.0;
  return a * std::cyl_bessel_k(1.0, a);
}

double kernel_H(double r, double eps, double m) {
  if (!(eps > 0.0)) domain_error("kernel_H requires eps > 0");
  if (eps > 1.0) domain_error("kernel_H: eps > 1 gives an empty integration range [1, 1/eps]");
  if (!(m > 0.0)) domain_error("kernel_H requires m > 0");
  if (r == 0.0) return -std::log(eps);
  const double a = m * r;
  const double k_outer = a > 700.0 ? 0.0 : std::cyl_bessel_k(0.0, a);
  const double b = a / eps;
  const double k_inner = b > 700.0 ? 0.0 : std::cyl_bessel_k(0.0, b);
  return k_outer - k_inner;
}

double kernel_H(Point x, Point y, double eps, double m) { return kernel_H(distance(x, y), eps, m); }

double spectral_shell(double r, double t0, double t1, int d, double m, const std::function<double(double)>& weight,
                      double weight_freq) {
  if (!(t1 >= t0) || t0 < 0.0 || !std::isfinite(t1)) domain_error("spectral_shell needs 0 <= t0 <= t1 < inf");
  if (t0 == t1) return 0.0;
  auto integrand = [&](double t) {
    const double w = weight ? weight(t) : 1.0;
    return sphere_average_cos(r * t, d) * w * spectral_density_radial(t, d, m);
  };
  const double freq = r + 2.0 * weight_freq;
  const double panel = freq > 0.0 ? kPi / freq : 0.0;
  // Near t = 0 the density varies on the scale m; give it its own panels.
  const double split = std::min(t1, std::max(t0, 4.0 * m));
  double total = 0.0;
  if (split > t0) total += quad::integrate_panels(integrand, t0, split, panel > 0 ? std::min(panel, m) : m);
  if (t1 > split) total += quad::integrate_panels(integrand, split, t1, panel);
  return total;
}

double spectral_full(double r, int d, double m, const Mollifier& moll, double eps_min,
                     const std::function<double(double)>& weight, double eps_max) {
  const double upper = mollifier_cutoff(moll, eps_min);
  if (moll.kind == MollifierKind::Gaussian) return spectral_shell(r, 0.0, upper, d, m, weight);
  const double weight_freq = moll.width * std::max(eps_min, eps_max);
  double total = spectral_shell(r, 0.0, upper, d, m, weight, weight_freq);
  if (r == 0.0) {
    // Beyond the cut the weight behaves like c / t^{d-1} times an oscillation; with the
    // density ~ t^{-1} the remainder is c T^{1-d} / (d - 1), c averaged over a window past T.
    const double window = 40.0 * std::numbers::pi / (moll.width * eps_min);
    auto scaled = [&](double t) { return std::pow(t / upper, d - 1) * weight(t); };
    const double mean =
        quad::integrate_panels(scaled, upper, upper + window, std::numbers::pi / (2.0 * weight_freq)) / window;
    total += mean / (d - 1);
  }
  return total;
}

double kernel_K(double r, double eps, const CutoffSpec& spec) {
  if (r < 0.0) domain_error("kernel_K requires r >= 0");
  if (!(eps > 0.0)) domain_error("kernel_K requires eps > 0");
  const int d = spec.d;
  const double m = spec.m;
  if (spec.family == Family::WhiteNoise) {
    const double R = 1.0 / eps;
    if (r == 0.0) {
      if (d == 2) return 0.5 * std::log1p((R / m) * (R / m));
      if (d == 3) return std::asinh(R / m) - R / std::hypot(m, R);
    }
    return spectral_shell(r, 0.0, R, d, m);
  }
  if (spec.family == Family::Mollified) {
    const Mollifier& moll = spec.mollifier.value();
    if (r == 0.0 && d == 2 && moll.kind == MollifierKind::Gaussian) {
      // int_0^inf exp(-a t^2) t / (m^2 + t^2) dt = e^{a m^2} E_1(a m^2) / 2, a = (w eps)^2.
      const double x = std::pow(moll.width * eps * m, 2);
      return -0.5 * std::exp(x) * std::expint(-x);
    }
    auto weight = [&](double t) {
      const double th = moll.fourier(eps * t, d);
      return th * th;
    };
    return spectral_full(r, d, m, moll, eps, weight);
  }
  usage_error("kernel_K supports the white-noise and mollified families only (got " + to_string(spec.family) + ")");
}

namespace {

double gaussian_tail_sum(double c, int from) {
  // sum_{j > from} exp(-c j^2)
  double s = 0.0;
  for (int j = from + 1;; ++j) {
    const double term = std::exp(-c * static_cast<double>(j) * j);
    s += term;
    if (term < 1e-300 || term < 1e-18 * s) break;
  }
  return s;
}

}  // namespace

int heat_kernel_modes(double t, double tol) {
  if (!(t > 0.0)) domain_error("heat kernel requires t > 0");
  const double c = kPi * kPi * t / 2.0;
  const double full = gaussian_tail_sum(c, 0);
  int M = 1;
  while (8.0 * gaussian_tail_sum(c, M) * full > tol) M = M < 8 ? M + 1 : static_cast<int>(M * 1.25);
  return M;
}

double heat_kernel_D(double t, Point x, Point y, int modes) {
  if (!(t > 0.0)) domain_error("heat_kernel_D requires t > 0");
  const int M = modes > 0 ? modes : heat_kernel_modes(t);
  const double c = kPi * kPi * t / 2.0;
  double px = 0.0, py = 0.0;
  for (int j = 1; j <= M; ++j) {
    const double e = std::exp(-c * static_cast<double>(j) * j);
    px += e * 2.0 * std::sin(kPi * j * x.x) * std::sin(kPi * j * y.x);
    py += e * 2.0 * std::sin(kPi * j * x.y) * std::sin(kPi * j * y.y);
  }
  return px * py;
}

int semigroup_modes(double eps, double tol) {
  if (!(eps > 0.0)) domain_error("semigroup kernel requires eps > 0");
  const double c = kPi * kPi * eps / 2.0;
  const double full = gaussian_tail_sum(c, 0);
  auto tail = [&](int M) {
    double s = 0.0;
    for (int j = M + 1;; ++j) {
      const double term = std::exp(-c * static_cast<double>(j) * j) * 2.0 / (kPi * kPi * j * j);
      s += term;
      if (term < 1e-300 || term < 1e-18 * s) break;
    }
    return 16.0 * kPi * s * full;
  };
  int M = 1;
  while (tail(M) > tol) M = M < 8 ? M + 1 : static_cast<int>(M * 1.25);
  return M;
}

namespace {

// 2 pi sum_{j,k <= M} (E(eps_lo) - E(eps_hi)) / lambda phi(x) phi(y), with E(inf) = 0.
double semigroup_slice(Point x, Point y, double eps_lo, double eps_hi, int M) {
  std::vector<double> ax(M), ay(M), elo_x(M), ehi_x(M);
  const bool open_top = !std::isfinite(eps_hi);
  for (int j = 1; j <= M; ++j) {
    ax[j - 1] = std::sin(kPi * j * x.x) * std::sin(kPi * j * y.x);
    ay[j - 1] = std::sin(kPi * j * x.y) * std::sin(kPi * j * y.y);
    elo_x[j - 1] = std::exp(-kPi * kPi * eps_lo * j * j / 2.0);
    ehi_x[j - 1] = open_top ? 0.0 : std::exp(-kPi * kPi * eps_hi * j * j / 2.0);
  }
  double total = 0.0;
  for (int j = 1; j <= M; ++j) {
    double row = 0.0;
    for (int k = 1; k <= M; ++k) {
      const double lam = kPi * kPi * (static_cast<double>(j) * j + static_cast<double>(k) * k) / 2.0;
      const double diff = elo_x[j - 1] * elo_x[k - 1] - ehi_x[j - 1] * ehi_x[k - 1];
      row += diff / lam * ay[k - 1];
    }
    total += row * ax[j - 1];
  }
  return 2.0 * kPi * 4.0 * total;
}

}  // namespace

double kernel_G_semigroup(Point x, Point y, double eps, int modes) {
  if (!(eps > 0.0)) domain_error("kernel_G_semigroup requires eps > 0");
  const int M = modes > 0 ? modes : semigroup_modes(eps);
  return semigroup_slice(x, y, eps, std::numeric_limits<double>::infinity(), M);
}

double varG(double eps, const CutoffSpec& spec, Point x) {
  if (!(eps > 0.0)) domain_error("varG requires eps > 0");
  switch (spec.family) {
    case Family::WhiteNoise:
    case Family::Mollified: return kernel_K(0.0, eps, spec);
    case Family::MassiveIntegral: return kernel_H(0.0, eps, spec.m);
    case Family::GffSemigroup: check_semigroup_points(spec, x, x); return kernel_G_semigroup(x, x, eps);
  }
  return 0.0;
}

ScaleDecomposition::ScaleDecomposition(CutoffSpec spec, std::vector<double> scales)
    : spec_(std::move(spec)), scales_(std::move(scales)) {
  spec_.validate();
  if (scales_.empty()) usage_error("scale decomposition needs at least one scale");
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    if (!(scales_[i] > 0.0)) usage_error("scales must be positive");
    if (i > 0 && !(scales_[i] < scales_[i - 1])) usage_error("scales must be strictly decreasing");
  }
  if (spec_.family == Family::MassiveIntegral && scales_.front() > 1.0) {
    usage_error("massive-integral scales must not exceed 1");
  }
}

ScaleDecomposition ScaleDecomposition::efolds(const CutoffSpec& spec, int n_max) {
  if (n_max < 1) usage_error("n_max must be >= 1");
  std::vector<double> s(n_max);
  for (int k = 1; k <= n_max; ++k) s[k - 1] = std::exp(-static_cast<double>(k));
  return ScaleDecomposition(spec, std::move(s));
}

double ScaleDecomposition::level(int n, Point x, Point y) const {
  if (n == 0) return 0.0;
  const double eps = scales_.at(n - 1);
  const double r = distance(x, y);
  switch (spec_.family) {
    case Family::WhiteNoise:
    case Family::Mollified: return kernel_K(r, eps, spec_);
    case Family::MassiveIntegral: return kernel_H(r, eps, spec_.m);
    case Family::GffSemigroup: check_semigroup_points(spec_, x, y); return kernel_G_semigroup(x, y, eps);
  }
  return 0.0;
}

double ScaleDecomposition::q(int n, Point x, Point y) const {
  if (n < 0 || n > size()) usage_error("scale index out of range");
  return level(n, x, y);
}

double ScaleDecomposition::p(int k, Point x, Point y) const {
  if (k < 1 || k > size()) usage_error("scale index out of range");
  const double eps_k = scales_[k - 1];
  const double r = distance(x, y);
  switch (spec_.family) {
    case Family::WhiteNoise: {
      const double t0 = k == 1 ? 0.0 : 1.0 / scales_[k - 2];
      return spectral_shell(r, t0, 1.0 / eps_k, spec_.d, spec_.m);
    }
    case Family::MassiveIntegral: {
      const double eps_prev = k == 1 ? 1.0 : scales_[k - 2];
      if (r == 0.0) return std::log(eps_prev / eps_k);
      const double m = spec_.m;
      const double a = m * r / eps_prev, b = m * r / eps_k;
      return (a > 700.0 ? 0.0 : std::cyl_bessel_k(0.0, a)) - (b > 700.0 ? 0.0 : std::cyl_bessel_k(0.0, b));
    }
    case Family::GffSemigroup: {
      check_semigroup_points(spec_, x, y);
      const double eps_prev = k == 1 ? std::numeric_limits<double>::infinity() : scales_[k - 2];
      return semigroup_slice(x, y, eps_k, eps_prev, semigroup_modes(eps_k));
    }
    case Family::Mollified: return level(k, x, y) - level(k - 1, x, y);
  }
  return 0.0;
}

}  // namespace thick
