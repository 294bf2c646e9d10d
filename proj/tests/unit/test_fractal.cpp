#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "support/stats.hpp"
#include "thick/errors.hpp"
#include "thick/fractal.hpp"

using namespace thick;

TEST_CASE("delta rule") {
  const DeltaRule d{};
  CHECK(std::isinf(d(1)));
  CHECK(d(3) == doctest::Approx(1.0 / std::sqrt(std::log(3.0))));
  CHECK(d(100) < d(10));
  CHECK(DeltaRule::none()(7) == 0.0);
  const auto p = power_scales(4, 2.0);
  CHECK(p.size() == 4);
  CHECK(p.front() == doctest::Approx(0.25));
  CHECK(p.back() == doctest::Approx(1.0 / 25.0));
}

TEST_CASE("a = 0 selects half of the cells") {
  const SpectralSampler s(CutoffSpec::white_noise(), {16, 1.0, {}}, efold_scales(3));
  const auto G = continuum_normaliser(s.spec(), s.scales());
  const int R = 4000;
  std::vector<double> hit(R);
  ThickOptions opt;
  opt.delta = DeltaRule::none();
  for (int r = 0; r < R; ++r) {
    const auto t = thick_cells(s.sample(6, r), G, 0.0, opt);
    hit[r] = t.grids[2][37];
  }
  const auto m = thick::testing::mean_se(hit);
  CHECK(std::abs(m.mean - 0.5) < 5 * m.se);
}

TEST_CASE("thick sets shrink as a grows") {
  const SpectralSampler s(CutoffSpec::white_noise(), {32, 1.0, {}}, efold_scales(4));
  const auto G = continuum_normaliser(s.spec(), s.scales());
  const auto f = s.sample(2, 0);
  for (auto mode : {ThickMode::AtLeast, ThickMode::Band}) {
    ThickOptions opt;
    opt.mode = mode;
    opt.delta = DeltaRule::none();
    const auto lo = thick_cells(f, G, 0.3, opt), hi = thick_cells(f, G, 0.8, opt);
    for (int n = 0; n < 4; ++n) {
      if (mode == ThickMode::AtLeast) {
        for (std::size_t c = 0; c < f.lattice.size(); ++c) CHECK((hi.grids[n][c] <= lo.grids[n][c]));
        CHECK(hi.counts[n] <= lo.counts[n]);
      } else {
        CHECK(lo.counts[n] == 0);  // a zero-width band is empty almost surely
      }
    }
  }
  const auto multi = thick_cells(f, G, std::vector<double>{0.3, 0.8});
  const auto single = thick_cells(f, G, 0.8);
  CHECK(multi[1].counts == single.counts);
  CHECK(multi[1].delta == single.delta);
  CHECK(std::isinf(single.delta[0]));
  CHECK(single.counts[0] == static_cast<std::int64_t>(f.lattice.size()));
}

TEST_CASE("normalised maxima") {
  const auto spec = CutoffSpec::white_noise();
  const SpectralSampler coarse(spec, {16, 1.0, {}}, efold_scales(3)), fine(spec, {32, 1.0, {}}, efold_scales(3));
  const auto G = continuum_normaliser(spec, coarse.scales());
  for (int r = 0; r < 20; ++r) {
    const auto a = sup_normalized(coarse.sample(4, r), G), b = sup_normalized(fine.sample(4, r), G);
    for (int n = 0; n < 3; ++n) CHECK(b[n] >= a[n] - 1e-12);
  }
  // A torus much larger than the correlation length: many nearly independent values.
  const SpectralSampler wide(spec, {32, 16.0, {}}, efold_scales(1));
  const auto G1 = continuum_normaliser(spec, wide.scales());
  for (int r = 0; r < 20; ++r) {
    const double sup = sup_normalized(wide.sample(4, r), G1)[0];
    CHECK(sup >= 0.0);
    CHECK(sup <= 6.0);
  }
}

TEST_CASE("box counting on deterministic fixtures") {
  const int N = 2187;  // 3^7
  struct Case {
    std::vector<char> grid;
    double dim;
  };
  const Case cases[] = {{fixture_square(N), 2.0},
                        {fixture_segment(N), 1.0},
                        {fixture_cantor_dust(N), 2.0 * std::log(2.0) / std::log(3.0)}};
  for (const auto& c : cases) {
    std::vector<double> r, count;
    for (int k = 0; k <= 6; ++k) {
      const int box = static_cast<int>(std::lround(std::pow(3.0, k)));
      r.push_back(static_cast<double>(box) / N);
      count.push_back(static_cast<double>(box_count(c.grid, N, box)));
    }
    const auto fit = fit_dimension(r, {count}, 0.0);
    CHECK(fit.slope == doctest::Approx(c.dim).epsilon(0.05 / c.dim));
  }
  CHECK(box_count(fixture_square(10), 10, 4) == 9);
}

TEST_CASE("dimension fits") {
  const std::vector<double> r{0.1, 0.05, 0.02, 0.01, 0.005};
  std::vector<std::vector<double>> counts;
  for (double scale : {1.0, 2.0, 3.0}) {
    std::vector<double> c;
    for (double x : r) c.push_back(scale * std::pow(x, -1.5));
    counts.push_back(c);
  }
  const auto fit = fit_dimension(r, counts, 1.0);
  CHECK(fit.slope == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(fit.slope_se < 1e-10);
  CHECK(fit.predicted == doctest::Approx(1.5));
  const auto none = fit_dimension(r, {std::vector<double>(5, 0.0)}, 3.0);
  CHECK(none.empty);
  CHECK(none.verdict == "empty set");
  CHECK(default_window(10) == std::vector<int>{3, 4, 5, 6, 7, 8, 9});

  std::vector<SpectrumPoint> pts;
  for (double a : {1.0, 0.0, 0.5, 1.5}) {
    SpectrumPoint p;
    p.a = a;
    p.fit.slope = 2.0 - 0.5 * a * a;
    p.fit.verdict = "fitted";
    pts.push_back(p);
  }
  const auto sp = assemble_spectrum(pts);
  CHECK(sp.c2 == doctest::Approx(-0.5).epsilon(1e-10));
  CHECK(sp.c0 == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(sp.monotonicity_violations == 0);
  CHECK(sp.points.front().a == 0.0);
}

TEST_CASE("net covering count") {
  ThickCellSets s;
  s.lattice = {8, 2.0, {}};
  s.scales = {0.5};
  s.counts = {16};
  s.grids = {std::vector<char>(64, 0)};
  for (int c = 0; c < 16; ++c) s.grids[0][c] = 1;
  CHECK(covering_count(s, 1, CountMethod::Net) == doctest::Approx(16.0 * 0.25));
  CHECK(covering_count(s, 1, CountMethod::Box) == doctest::Approx(4.0));  // two rows of 2 x 2 boxes
}

TEST_CASE("Borel-Cantelli tail") {
  CHECK(std::isinf(borel_cantelli_tail(1.0, 2, 0.5, 10)));
  double direct = 0.0;
  for (int n = 10; n < 2000000; ++n) direct += std::pow(n, -3.0);
  CHECK(borel_cantelli_tail(3.0, 2, 0.5, 10) == doctest::Approx(direct).epsilon(1e-6));
}
