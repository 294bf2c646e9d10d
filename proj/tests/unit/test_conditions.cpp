#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "thick/conditions.hpp"
#include "thick/errors.hpp"

using namespace thick;

TEST_CASE("log grids") {
  const auto v = LogGrid{1e-3, 1e-1, 3}.values();
  REQUIRE(v.size() == 3);
  CHECK(v[1] == doctest::Approx(1e-2).epsilon(1e-12));
  CHECK(LogGrid{1e-3, 1e-1, 3}.refined().values().size() == 5);
  CHECK_THROWS_AS(LogGrid({1e-1, 1e-3, 3}).values(), Error);
}

TEST_CASE("variance law (B)") {
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
  const auto mi = check_B(CutoffSpec::massive_integral(), eps);
  CHECK(mi.pass);
  CHECK(mi.worst_ratio < 1e-12);
  const auto wn = check_B(CutoffSpec::white_noise(), eps);
  CHECK(wn.pass);
  CHECK(wn.worst_ratio < 1e-6);
  CHECK(wn.rows.size() == eps.size());
  CHECK_THROWS_AS(check_B(CutoffSpec::white_noise(), {1e-1, 1e-2}), Error);
  CHECK_THROWS_AS(wn.constant("missing"), Error);
}

TEST_CASE("Holder-type increment bound (A)") {
  const LogGrid eps{1e-3, 1e-1, 3}, r{1e-3, 1.0, 4};
  const auto mi = check_A(CutoffSpec::massive_integral(), eps, r);
  CHECK(std::isfinite(mi.worst_ratio));
  CHECK(mi.worst_ratio > 0.0);
  for (const auto& row : mi.rows) {
    CHECK(row.value >= -1e-9);
    CHECK_FALSE((distance(row.x, row.y) == 0.0 && row.eps == row.eta));
  }
  // Nested scales: on the diagonal the increment variance is Var X_eta - Var X_eps.
  const auto spec = CutoffSpec::massive_integral();
  const Point o{0.0, 0.0};
  const double v = joint_covariance(spec, o, o, 1e-1, 1e-3);
  CHECK(v == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  const auto gff = CutoffSpec::gff_semigroup();
  CHECK(max_probe_separation(gff) < 0.6 + 1e-12);
  CHECK_THROWS_AS(probe_pair(gff, 0.9), Error);
  const auto [x, y] = probe_pair(gff, 0.5);
  CHECK(distance(x, y) == doctest::Approx(0.5));
}

TEST_CASE("increment constants on the full grid are frozen") {
  const LogGrid eps{1e-4, 1e-1, 4}, r{1e-4, 1.0, 5};
  const auto mi = check_A(CutoffSpec::massive_integral(), eps, r);
  CHECK(mi.constant("C") == doctest::Approx(0.67304433529732).epsilon(1e-8));
  CHECK(mi.constant("C_coarse") == doctest::Approx(0.6101857935332333).epsilon(1e-8));
  CHECK(mi.pass);
  const auto wn = check_A(CutoffSpec::white_noise(1.0, 2, 1000.0), eps, r);
  CHECK(wn.constant("C") == doctest::Approx(0.5843106238822614).epsilon(1e-6));
  CHECK(wn.constant("C_coarse") == doctest::Approx(0.43557288385824255).epsilon(1e-6));
  CHECK_FALSE(wn.pass);  // refinement change 0.149 exceeds 0.1
}

TEST_CASE("scale decomposition bounds (C) and positivity (D)") {
  const auto spec = CutoffSpec::massive_integral();
  const auto c = check_C(spec, 6, {1e-3, 1.0, 4});
  CHECK(std::isfinite(c.constant("sup_H_U")));
  CHECK(std::isfinite(c.constant("C_prime")));
  // q_n(x, y) <= log 1/r + O(1) with q_n = K0(m r) - K0(m r e^n) for this family.
  CHECK(c.constant("sup_H_U") < 1.0);

  const auto d = check_D(spec, 6, 3, 12, 7);
  CHECK(d.pass);
  CHECK(d.constant("max_p_kk") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.constant("terminal_deviation") < 1e-12);

  const auto moll = CutoffSpec::mollified({MollifierKind::Gaussian, 1.0});
  CHECK_FALSE(check_C(moll, 4).applicable);
  CHECK_FALSE(check_D(moll, 4).applicable);
}

TEST_CASE("mode coupling (E)") {
  const auto wn = CutoffSpec::white_noise();
  const auto moll = CutoffSpec::mollified({MollifierKind::Gaussian, 1.0});
  const auto zero = ModeCoupling::make(wn, wn);
  CHECK(zero.zero);
  CHECK(zero.variance(1e-2) == 0.0);
  try {
    ModeCoupling::make(wn, CutoffSpec::massive_integral());
    FAIL("expected a usage error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("no coupling defined") != std::string::npos);
  }
  const auto c = ModeCoupling::make(moll, wn);
  CHECK_FALSE(c.zero);
  // Var Z_eps does not depend on eps: the density is eps-scale invariant up to the mass.
  const double v1 = c.variance(1e-2), v2 = c.variance(1e-3);
  CHECK(v1 > 0.0);
  CHECK(v2 == doctest::Approx(v1).epsilon(1e-3));
  CHECK(c.covariance(0.05, 1e-2) < v1);

  const auto reports = check_E(wn, moll, {1e-3, 1e-1, 3}, {1e-3, 1.0, 3});
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].id == "E-var");
  CHECK(reports[0].pass);
  CHECK(reports[1].id == "E-incr");
  CHECK(std::isfinite(reports[1].worst_ratio));
}

TEST_CASE("tiled maximum sampler") {
  const auto c = ModeCoupling::make(CutoffSpec::white_noise(), CutoffSpec::mollified({MollifierKind::Gaussian, 1.0}));
  const ZTileSampler s(c, 1e-2, 0.5);
  CHECK(s.tiles_per_side() == 1);
  CHECK(s.tile().h() == doctest::Approx(1e-2).epsilon(0.1));
  CHECK(s.lattice_variance() == doctest::Approx(c.variance(1e-2)).epsilon(0.05));
  const auto f = s.tile_field(1, 0, 3), g = s.tile_field(1, 0, 3);
  CHECK(f == g);
  CHECK(s.sup(1, 0, 0) == s.sup(1, 0, 0));

  const ZTileSampler big(c, 2e-4, 0.5, 1024);
  CHECK(big.tiles_per_side() == 3);

  CHECK_THROWS_AS(check_max_scaling(CutoffSpec::white_noise(), CutoffSpec::white_noise(), {1e-2, 1e-3}, 4, 1),
                  Error);
  const auto z = check_max_scaling(CutoffSpec::white_noise(), CutoffSpec::white_noise(), {1e-1, 1e-2, 1e-3}, 4, 1);
  for (double m : z.mean_sup) CHECK(m == 0.0);
}
