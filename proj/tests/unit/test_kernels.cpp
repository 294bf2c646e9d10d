#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "thick/errors.hpp"
#include "thick/kernels.hpp"

using namespace thick;

namespace {

constexpr double kPi = std::numbers::pi;

// Oracles built from the defining integrals only (no closed forms).
double oracle_bessel_k(int order, double z) {
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([&](double t) {
    const double e = z * std::cosh(t);
    return e > 700.0 ? 0.0 : std::exp(-e) * std::cosh(order * t);
  });
}

double oracle_k_m(double z, double m) {
  boost::math::quadrature::exp_sinh<double> integrator;
  if (z == 0.0) return 1.0;
  const double c = m * m * z * z / 2.0;
  return 0.5 * integrator.integrate([&](double v) { return v <= 0.0 ? 0.0 : std::exp(-c / v - v / 2.0); });
}

double oracle_H(double r, double eps, double m) {
  // int_0^{log(1/eps)} k_m(e^s r) ds, with k_m from its own quadrature.
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  return GK::integrate([&](double s) { return oracle_k_m(std::exp(s) * r, m); }, 0.0, -std::log(eps), 15, 1e-12);
}

// 1-D Dirichlet heat kernel on [0,1] by the method of images (generator Laplacian/2).
double image_kernel_1d(double t, double a, double b) {
  double s = 0.0;
  for (int n = -20; n <= 20; ++n) {
    const double z1 = a - b + 2.0 * n, z2 = a + b + 2.0 * n;
    s += std::exp(-z1 * z1 / (2 * t)) - std::exp(-z2 * z2 / (2 * t));
  }
  return s / std::sqrt(2 * kPi * t);
}

double min_rel_eigen(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  return es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff();
}

std::vector<Point> random_points(int n, double lo, double hi, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point> pts(n);
  for (auto& p : pts) p = {u(gen), u(gen)};
  return pts;
}

}  // namespace

TEST_CASE("bessel_k against the cosh integral") {
  // Frozen 10-digit oracle value.
  CHECK(oracle_bessel_k(0, 1.0) == doctest::Approx(0.4210244382).epsilon(1e-10));
  for (double z : {1e-3, 0.1, 0.5, 1.0, 2.5, 7.0, 20.0, 60.0}) {
    for (int order : {0, 1}) {
      CHECK(bessel_k(order, z) == doctest::Approx(oracle_bessel_k(order, z)).epsilon(1e-10));
    }
  }
  const double z = 20.0;
  CHECK(bessel_k(0, z) / (std::exp(-z) * std::sqrt(kPi / (2 * z))) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(1e-8 * bessel_k(1, 1e-8) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(bessel_k(0, 0.0), Error);
  CHECK_THROWS_AS(bessel_k(1, -1.0), Error);
}

TEST_CASE("k_m closed form matches its defining integral") {
  CHECK(k_m(0.0, 3.0) == 1.0);
  CHECK(oracle_k_m(1.0, 1.0) == doctest::Approx(0.6019072301972346).epsilon(1e-10));
  double prev = 1.0;
  for (double z = 1e-3; z <= 20.0; z *= 1.3) {
    for (double m : {0.5, 1.0, 2.0}) {
      const double v = k_m(z, m);
      CHECK(std::abs(v - oracle_k_m(z, m)) < 1e-8);
    }
    const double v = k_m(z, 1.0);
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
  }
}

TEST_CASE("kernel_H") {
  for (double eps = 1e-1; eps >= 1e-6; eps /= 10) CHECK(std::abs(kernel_H(0.0, eps, 1.0) + std::log(eps)) < 1e-12);
  CHECK(kernel_H(0.3, 1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(kernel_H(0.3, 1.5, 1.0), Error);
  for (double r : {1e-3, 0.01, 0.1, 0.5, 1.4}) {
    for (double eps : {0.5, 1e-2, 1e-4}) {
      CHECK(std::abs(kernel_H(r, eps, 1.0) - oracle_H(r, eps, 1.0)) < 1e-7);
      CHECK(kernel_H(r, eps, 1.0) >= 0.0);
    }
  }
  Point x{0.2, 0.3}, y{0.5, 0.7};
  CHECK(kernel_H(x, y, 1e-3, 2.0) == kernel_H(y, x, 1e-3, 2.0));
}

TEST_CASE("white-noise K and its variance law") {
  const auto wn = CutoffSpec::white_noise();
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
    CHECK(std::abs(kernel_K(0.0, eps, wn) - 0.5 * std::log1p(1.0 / (eps * eps))) < 1e-10);
    CHECK(std::abs(varG(eps, wn) - kernel_K(0.0, eps, wn)) == 0.0);
  }
  // Radial quadrature path at r -> 0 agrees with the closed form.
  CHECK(kernel_K(1e-9, 1e-2, wn) == doctest::Approx(kernel_K(0.0, 1e-2, wn)).epsilon(1e-8));
  CHECK(std::abs(varG(1e-4, wn) / -std::log(1e-4) - 1.0) < 1e-4);

  // d = 3 closed form against plain quadrature of t^2/(1+t^2)^{3/2}.
  const auto wn3 = CutoffSpec::white_noise(1.0, 3);
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double eps : {0.1, 0.01}) {
    const double oracle = ts.integrate([](double t) { return t * t / std::pow(1 + t * t, 1.5); }, 0.0, 1.0 / eps);
    CHECK(kernel_K(0.0, eps, wn3) == doctest::Approx(oracle).epsilon(1e-10));
  }

  // The truncated kernel takes negative values.
  bool negative = false;
  for (double eps : {1.0, 0.5, 0.1}) {
    for (double r = 0.25; r < 10.0 && !negative; r += 0.25) negative = kernel_K(r, eps, wn) < -1e-6;
  }
  CHECK(negative);

  // Symmetric-domain cross-check of the radial reduction: J0 integral by 2-D quadrature on a small ball.
  const double eps = 0.5, r = 0.7;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double two_d = GK::integrate(
      [&](double t) {
        return GK::integrate([&](double phi) { return std::cos(r * t * std::cos(phi)); }, 0.0, 2 * kPi, 10, 1e-13) *
               t / (1 + t * t);
      },
      0.0, 1.0 / eps, 10, 1e-13) /
                       (2 * kPi);
  CHECK(kernel_K(r, eps, wn) == doctest::Approx(two_d).epsilon(1e-9));
}

TEST_CASE("mollified K") {
  const auto wn = CutoffSpec::white_noise();
  const auto gm = CutoffSpec::mollified({MollifierKind::Gaussian, 1.0});
  boost::math::quadrature::exp_sinh<double> es;
  for (double eps : {0.3, 1e-2, 1e-4}) {
    const double a = eps * eps;
    const double oracle = es.integrate([&](double t) { return std::exp(-a * t * t) * t / (1 + t * t); });
    CHECK(kernel_K(0.0, eps, gm) == doctest::Approx(oracle).epsilon(1e-9));
    // Generic radial path near r = 0 agrees with the closed form.
    CHECK(kernel_K(1e-10, eps, gm) == doctest::Approx(oracle).epsilon(1e-7));
  }
  CHECK(std::abs(varG(1e-4, gm) / -std::log(1e-4) - 1.0) < 0.05);
  const auto sp = CutoffSpec::mollified({MollifierKind::Sphere, 1.0});
  // int_0^inf J0(a t)^2 t / (t^2 + 1) dt = I0(a) K0(a).
  for (double eps : {0.5, 0.1, 0.01}) {
    CHECK(kernel_K(0.0, eps, sp) == doctest::Approx(std::cyl_bessel_i(0.0, eps) * std::cyl_bessel_k(0.0, eps)).epsilon(1e-6));
  }
  for (double eps : {0.3, 0.05}) {
    for (double r : {0.0, 0.01, 0.2, 0.9}) {
      CHECK(std::abs(kernel_K(r, eps, gm)) <= kernel_K(0.0, eps, wn) + 1e-9);
      CHECK(std::abs(kernel_K(r, eps, sp)) <= kernel_K(0.0, eps, sp) + 1e-6);
    }
  }
  CHECK_THROWS_AS(kernel_K(0.1, 0.1, CutoffSpec::massive_integral()), Error);
}

TEST_CASE("Dirichlet heat kernel") {
  for (double t : {1e-3, 0.01, 0.1, 0.5}) {
    for (Point x : {Point{0.5, 0.5}, Point{0.25, 0.4}, Point{0.1, 0.85}}) {
      const Point y{0.45, 0.55};
      const double oracle = image_kernel_1d(t, x.x, y.x) * image_kernel_1d(t, x.y, y.y);
      CHECK(std::abs(heat_kernel_D(t, x, y) - oracle) < 1e-9);
      const double diag = heat_kernel_D(t, x, x);
      const double dist = std::min({x.x, x.y, 1 - x.x, 1 - x.y});
      CHECK(diag <= 1.0 / (2 * kPi * t) + 1e-10);
      CHECK(diag >= 1.0 / (2 * kPi * t) - 1.0 / (kPi * std::exp(1.0) * dist * dist));
    }
  }
  // Sub-Markov: integral over y is at most 1.
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  for (double t : {0.01, 0.2}) {
    const Point x{0.3, 0.6};
    const double mass = GK::integrate(
        [&](double y1) {
          return GK::integrate([&](double y2) { return heat_kernel_D(t, x, {y1, y2}); }, 0.0, 1.0, 8, 1e-9);
        },
        0.0, 1.0, 8, 1e-9);
    CHECK(mass <= 1.0 + 1e-9);
    CHECK(mass > 0.0);
  }
  CHECK_THROWS_AS(heat_kernel_D(0.0, {0.5, 0.5}, {0.5, 0.5}), Error);
}

TEST_CASE("semigroup kernel") {
  const Point c{0.5, 0.5};
  // Frozen eigen-sum oracle: G(c, c) + log eps is constant.
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    CHECK(kernel_G_semigroup(c, c, eps) + std::log(eps) == doctest::Approx(-1.35070300636).epsilon(1e-8));
  }
  // Time integral of the heat kernel, independently by quadrature in log s.
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  for (auto [x, y] : {std::pair{Point{0.3, 0.4}, Point{0.6, 0.7}}, std::pair{Point{0.5, 0.5}, Point{0.52, 0.5}}}) {
    const double eps = 1e-3;
    const double oracle = 2 * kPi *
                          GK::integrate([&](double s) { return std::exp(s) * heat_kernel_D(std::exp(s), x, y); },
                                        std::log(eps), std::log(60.0), 20, 1e-12);
    CHECK(std::abs(kernel_G_semigroup(x, y, eps) - oracle) < 1e-7);
    CHECK(kernel_G_semigroup(x, y, eps) == doctest::Approx(kernel_G_semigroup(y, x, eps)).epsilon(1e-14));
  }
  const auto pts = random_points(20, 0.2, 0.8, 7);
  Eigen::MatrixXd g(20, 20);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) g(i, j) = kernel_G_semigroup(pts[i], pts[j], 1e-2);
  CHECK(min_rel_eigen(g) >= -1e-8);

  const auto spec = CutoffSpec::gff_semigroup(0.2);
  int warnings = 0;
  set_warning_sink([&](const std::string&) { ++warnings; });
  varG(1e-2, spec, {0.05, 0.5});
  CHECK(warnings == 1);
  set_warning_sink({});
}

TEST_CASE("variance curves increase as eps decreases") {
  for (const auto& spec : {CutoffSpec::white_noise(), CutoffSpec::massive_integral(),
                           CutoffSpec::mollified({MollifierKind::Gaussian, 1.0}), CutoffSpec::gff_semigroup()}) {
    double prev = -1e300;
    for (double eps = 1.0; eps >= 1e-5; eps /= 3) {
      const double v = varG(eps, spec);
      CHECK(v > prev);
      prev = v;
    }
  }
  CHECK(varG(1.0, CutoffSpec::massive_integral()) == 0.0);
}

TEST_CASE("scale decompositions telescope and are positive semidefinite") {
  const std::vector<CutoffSpec> specs{CutoffSpec::white_noise(), CutoffSpec::massive_integral(),
                                      CutoffSpec::gff_semigroup(), CutoffSpec::mollified({MollifierKind::Gaussian, 0.7})};
  const auto pts = random_points(20, 0.25, 0.75, 11);
  for (const auto& spec : specs) {
    const auto dec = ScaleDecomposition::efolds(spec, 6);
    const Point x = pts[0], y = pts[1];
    for (int n = 1; n <= 6; ++n) {
      CHECK(std::abs(dec.q(n, x, y) - dec.q(n - 1, x, y) - dec.p(n, x, y)) < 1e-9);
      CHECK(std::abs(dec.q(n, x, x) - dec.q(n - 1, x, x) - dec.p(n, x, x)) < 1e-9);
    }
    if (spec.family != Family::Mollified) {
      CHECK(std::abs(dec.q(6, x, x) - varG(std::exp(-6.0), spec, x)) < 1e-9);
      for (int k : {1, 3, 6}) {
        Eigen::MatrixXd g(20, 20);
        for (int i = 0; i < 20; ++i)
          for (int j = i; j < 20; ++j) g(i, j) = g(j, i) = dec.p(k, pts[i], pts[j]);
        CHECK(min_rel_eigen(g) >= -1e-8);
      }
    }
    if (spec.family == Family::MassiveIntegral || spec.family == Family::GffSemigroup) {
      for (int k = 1; k <= 6; ++k) CHECK(dec.p(k, x, x) <= 1.0 + 1e-12);
    }
  }
  CHECK_THROWS_AS(ScaleDecomposition(CutoffSpec::white_noise(), {0.1, 0.2}), Error);
}
