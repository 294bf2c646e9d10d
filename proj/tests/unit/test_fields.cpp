#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "support/stats.hpp"
#include "thick/errors.hpp"
#include "thick/fields.hpp"

using namespace thick;
using thick::testing::centred_covariance;

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("synthesis places each mode as A cos + B sin") {
  const LatticeSpec lat{8, 1.0, {}};
  const SpectralLattice grid(lat);
  // (N/2 + 1) N half-complex slots minus the N/2 - 1 stored partners in each edge column.
  CHECK(grid.modes().size() == 8u * 5u - 2u * 3u);
  const NormalStream stream(5, 0, 1);
  for (std::size_t i = 0; i < grid.modes().size(); ++i) {
    const auto& mode = grid.modes()[i];
    std::vector<double> amp(grid.modes().size(), 0.0);
    amp[i] = 1.5;
    const auto field = grid.synthesize(amp, stream);
    const auto [a, b] = stream.pair(mode.key);
    for (std::size_t c = 0; c < lat.size(); ++c) {
      const double theta = 2 * kPi * (mode.kx * static_cast<double>(c % 8) + mode.ky * static_cast<double>(c / 8)) / 8;
      const double expected = mode.self_conjugate ? 1.5 * a * std::cos(theta) : 1.5 * (a * std::cos(theta) + b * std::sin(theta));
      CHECK(field[c] == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("white-noise sampler: exact variance, feasibility and nesting") {
  const auto spec = CutoffSpec::white_noise();
  const LatticeSpec lat{32, 2.0, {}};
  CHECK(SpectralSampler::max_resolved_level(lat) == 3);
  CHECK_THROWS_AS(SpectralSampler(spec, lat, efold_scales(4)), Error);
  try {
    SpectralSampler(spec, lat, efold_scales(4));
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Feasibility);
    CHECK(std::string(e.what()).find("N >= ") != std::string::npos);
  }
  const SpectralSampler s(spec, lat, efold_scales(3));
  for (int n = 1; n <= 3; ++n) {
    // Cell weights integrate the density exactly over each annulus.
    CHECK(std::abs(s.variance_bias(n)) < 1e-8);
    CHECK(s.difference_variance(n, n - 1, 0) == doctest::Approx(s.variance(n, 0) - s.variance(n - 1, 0)).epsilon(1e-12));
    CHECK(s.covariance(n, n, 5, 5) == doctest::Approx(s.variance(n, 5)).epsilon(1e-12));
  }
  CHECK(s.difference_variance(3, 1, 7) == doctest::Approx(s.variance(3, 7) - s.variance(1, 7)).epsilon(1e-12));

  const auto f1 = s.sample(42, 3), f2 = s.sample(42, 3), f3 = s.sample(42, 4);
  CHECK(f1.increments == f2.increments);
  CHECK(f1.increments != f3.increments);
  CHECK(f1.at_scale(0) == std::vector<double>(lat.size(), 0.0));
}

TEST_CASE("refining the lattice at fixed randomness nests the fields") {
  const auto spec = CutoffSpec::white_noise();
  const SpectralSampler coarse(spec, {16, 1.0, {}}, efold_scales(3));
  const SpectralSampler fine(spec, {32, 1.0, {}}, efold_scales(3));
  const auto a = coarse.sample(9, 0), b = fine.sample(9, 0);
  double worst = 0.0;
  double sup_coarse = -1e300, sup_fine = -1e300;
  const auto xa = a.at_scale(3), xb = b.at_scale(3);
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) worst = std::max(worst, std::abs(xa[j * 16 + i] - xb[(2 * j) * 32 + 2 * i]));
  }
  for (double v : xa) sup_coarse = std::max(sup_coarse, v);
  for (double v : xb) sup_fine = std::max(sup_fine, v);
  CHECK(worst < 1e-12);
  CHECK(sup_fine >= sup_coarse);
}

TEST_CASE("white-noise sampler: empirical moments over 10^4 replicas") {
  const auto spec = CutoffSpec::white_noise();
  const LatticeSpec lat{16, 4.0, {}};
  const SpectralSampler s(spec, lat, efold_scales(2));
  const int R = 10000;
  const std::size_t p0 = 0, p1 = 3, p2 = 3 * 16 + 1;
  std::vector<double> x0(R), x1(R), x2(R), y1(R), y2(R);
  for (int r = 0; r < R; ++r) {
    const auto f = s.sample(1, r);
    const auto x = f.at_scale(2);
    x0[r] = x[p0];
    x1[r] = x[p1];
    x2[r] = x[p2];
    y1[r] = f.increments[0][p0];
    y2[r] = f.increments[1][p0];
  }
  const auto v = centred_covariance(x0, x0);
  CHECK(std::abs(v.mean - s.variance(2, p0)) < 5 * v.se);
  for (auto [xs, cell] : {std::pair{&x1, p1}, std::pair{&x2, p2}}) {
    const auto c = centred_covariance(x0, *xs);
    CHECK(std::abs(c.mean - s.covariance(2, 2, p0, cell)) < 5 * c.se);
    // The lattice covariance reproduces the continuum kernel at these separations.
    const double r = distance(lat.point(p0), lat.point(cell));
    CHECK(std::abs(c.mean - kernel_K(r, std::exp(-2.0), spec)) < 5 * c.se + 0.01);
  }
  // Increments are independent.
  const auto c12 = centred_covariance(y1, y2);
  const double corr = c12.mean / std::sqrt(centred_covariance(y1, y1).mean * centred_covariance(y2, y2).mean);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(R));
}

TEST_CASE("mollified sampler") {
  const auto spec = CutoffSpec::mollified({MollifierKind::Gaussian, 1.0});
  const LatticeSpec lat{32, 2.0, {}};
  CHECK_THROWS_AS(SpectralSampler(spec, lat, efold_scales(5)), Error);
  const SpectralSampler s(spec, lat, efold_scales(3));
  CHECK(s.coupling() == Coupling::SharedModes);
  for (int n = 1; n <= 3; ++n) CHECK(std::abs(s.variance_bias(n)) < 0.01);
  // Shared modes: the increments are correlated, so the nesting identity is not expected.
  CHECK(s.difference_variance(3, 1, 0) != doctest::Approx(s.variance(3, 0) - s.variance(1, 0)));
  const auto f = s.sample(3, 0);
  const auto x3 = f.at_scale(3);
  CHECK(f.n_max() == 3);
  CHECK(std::isfinite(x3[17]));
  // Cross covariance against the kernel oracle at lattice separations.
  const double r = distance(lat.point(0), lat.point(2));
  CHECK(s.covariance(2, 2, 0, 2) == doctest::Approx(kernel_K(r, std::exp(-2.0), spec)).epsilon(0.01));
}

TEST_CASE("sine-basis sampler of the semigroup cut-off") {
  const auto lat = LatticeSpec::interior(8, 0.2);
  const GffSineSampler s(lat, {1e-1, 1e-2, 1e-3});
  const int M = s.modes();
  CHECK(GffSineSampler::tail_bound(1e-3, M) <= 0.01 * -std::log(1e-3));
  CHECK_THROWS_AS(GffSineSampler(lat, {1e-1, 1e-3}, 10), Error);
  for (std::size_t a : {0ul, 9ul, 27ul}) {
    for (std::size_t b : {0ul, 14ul, 63ul}) {
      CHECK(s.covariance(3, 3, a, b) ==
            doctest::Approx(kernel_G_semigroup(lat.point(a), lat.point(b), 1e-3, M)).epsilon(1e-12));
    }
    CHECK(s.difference_variance(3, 1, a) == doctest::Approx(s.variance(3, a) - s.variance(1, a)).epsilon(1e-12));
  }
  // Variance law at the centre: -log eps minus a bounded constant; the ratio tends to 1 slowly.
  const GffSineSampler centre({8, 0.25, {0.5 - 0.125, 0.5 - 0.125}}, {1e-2, 1e-3, 1e-4});
  const std::size_t mid = 4 * 8 + 4;
  CHECK(centre.lattice().point(mid).x == doctest::Approx(0.5));
  double prev = 0.0;
  for (int n = 1; n <= 3; ++n) {
    const double eps = centre.scales()[n - 1];
    const double ratio = centre.variance(n, mid) / -std::log(eps);
    CHECK(ratio > prev);
    // Truncation loses at most tail_bound; at the coarser levels nothing visible is lost.
    const double shortfall = -1.35070300636 - (centre.variance(n, mid) + std::log(eps));
    CHECK(shortfall <= GffSineSampler::tail_bound(eps, centre.modes()) + 1e-9);
    if (n <= 2) CHECK(std::abs(shortfall) < 1e-6);
    prev = ratio;
  }

  const int R = 10000;
  std::vector<double> xa(R), xb(R);
  for (int r = 0; r < R; ++r) {
    const auto x = s.sample(7, r).at_scale(2);
    xa[r] = x[9];
    xb[r] = x[18];
  }
  const auto c = centred_covariance(xa, xb);
  CHECK(std::abs(c.mean - s.covariance(2, 2, 9, 18)) < 5 * c.se);
}

TEST_CASE("dense sampler of the massive integral family") {
  const auto spec = CutoffSpec::massive_integral();
  CHECK_THROWS_AS(IntegralFamilySampler(spec, {66, 1.0, {}}, efold_scales(2)), Error);
  const LatticeSpec lat{8, 0.5, {}};
  const IntegralFamilySampler s(spec, lat, efold_scales(4));
  for (int n = 1; n <= 4; ++n) {
    CHECK(s.variance(n, 10) == doctest::Approx(n).epsilon(1e-9));
    CHECK(s.clipped()[n - 1] < 1e-9);
  }
  const int R = 10000;
  std::vector<double> xa(R), xb(R);
  for (int r = 0; r < R; ++r) {
    const auto x = s.sample(11, r).at_scale(4);
    xa[r] = x[0];
    xb[r] = x[9];
  }
  const auto c = centred_covariance(xa, xb);
  CHECK(std::abs(c.mean - kernel_H(lat.point(0), lat.point(9), std::exp(-4.0), 1.0)) < 5 * c.se);
  CHECK(thick::testing::ks_normal_pvalue(xa, 4.0) > 0.01);
}

TEST_CASE("exact sampler") {
  const std::vector<Point> pts{{0, 0}, {0.1, 0}, {0.3, 0.2}, {0.5, 0.5}};
  const int R = 10000;
  std::vector<std::vector<double>> draws(4, std::vector<double>(R));
  auto delta = [](Point a, Point b) { return distance(a, b) == 0.0 ? 1.0 : 0.0; };
  for (int r = 0; r < R; ++r) {
    const auto x = sample_exact(delta, pts, 1, r);
    for (int i = 0; i < 4; ++i) draws[i][r] = x[i];
  }
  const auto v = centred_covariance(draws[0], draws[0]);
  CHECK(std::abs(v.mean - 1.0) < 5 * v.se);
  const auto c = centred_covariance(draws[0], draws[1]);
  CHECK(std::abs(c.mean) < 5 * c.se);

  auto h = [](Point a, Point b) { return kernel_H(a, b, 1e-2, 1.0); };
  for (int r = 0; r < R; ++r) {
    const auto x = sample_exact(h, pts, 2, r);
    for (int i = 0; i < 4; ++i) draws[i][r] = x[i];
  }
  const auto ch = centred_covariance(draws[1], draws[2]);
  CHECK(std::abs(ch.mean - h(pts[1], pts[2])) < 5 * ch.se);

  const auto one = sample_exact([](Point, Point) { return 2.5; }, {{0.3, 0.3}}, 3, 0);
  CHECK(one.size() == 1);
  auto bad = [](Point a, Point b) { return distance(a, b) == 0.0 ? 1.0 : -0.9; };
  try {
    sample_exact(bad, pts, 1, 0);
    FAIL("expected a PSD failure");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Numerical);
    CHECK(std::string(e.what()).find("min eigenvalue") != std::string::npos);
  }
}

TEST_CASE("snapshot round trip") {
  const SpectralSampler s(CutoffSpec::white_noise(), {16, 1.0, {}}, efold_scales(2));
  const auto f = s.sample(4, 1);
  const auto path = (std::filesystem::temp_directory_path() / "thick_snapshot_test.bin").string();
  write_snapshot(path, f);
  const auto g = read_snapshot(path);
  std::remove(path.c_str());
  CHECK(g.lattice.N == 16);
  CHECK(g.seed == 4);
  CHECK(g.scales == f.scales);
  const auto a = f.at_scale(2), b = g.at_scale(2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("increment variances from the level weights match level differences") {
  const SpectralSampler wn(CutoffSpec::white_noise(), {16, 1.0, {}}, efold_scales(2));
  const GffSineSampler gff(LatticeSpec::interior(8, 0.2), {1e-1, 1e-2});
  const IntegralFamilySampler mi(CutoffSpec::massive_integral(), {8, 0.5, {}}, efold_scales(3));
  for (const FieldSampler* s : std::initializer_list<const FieldSampler*>{&wn, &gff, &mi}) {
    for (int k = 1; k <= s->n_max(); ++k) {
      CHECK(s->increment_variance(k, 9) ==
            doctest::Approx(s->variance(k, 9) - s->variance(k - 1, 9)).epsilon(1e-12));
    }
  }
}
