#include <catch2/catch_amalgamated.hpp>

#include "hk/let.hpp"
#include "hk/measure.hpp"

using namespace hk;

TEST_CASE("measure construction rules") {
  DiscreteMeasure mu(2, {{{0.0, 0.0}, 1.0}, {{1.0, 1.0}, 0.0}});
  CHECK(mu.atoms.size() == 1);  // zero-mass atoms dropped
  CHECK_THROWS_AS(DiscreteMeasure(2, {{{0.0}, 1.0}}), DimensionMismatch);
  CHECK_THROWS_AS(DiscreteMeasure(0), NonpositiveParameter);
}

TEST_CASE("support decomposition at the pi/2 threshold") {
  SECTION("both near at pi/3") {
    auto dec = decompose_supports(dirac({0.0}), dirac({pi / 3}));
    CHECK(dec.near0.size() == 1);
    CHECK(dec.near1.size() == 1);
    CHECK(dec.far0.empty());
  }
  SECTION("both far at distance 2") {
    auto dec = decompose_supports(dirac({0.0}), dirac({2.0}));
    CHECK(dec.near0.empty());
    CHECK(dec.near1.empty());
    CHECK(dec.far_mass0 == 1.0);
  }
  SECTION("mixed") {
    DiscreteMeasure mu1(1);
    mu1.add({pi / 3}, 1.0).add({2.0}, 1.0);
    auto dec = decompose_supports(dirac({0.0}), mu1);
    CHECK(dec.near1 == std::vector<std::size_t>{0});
    CHECK(dec.far1 == std::vector<std::size_t>{1});
  }
  SECTION("symmetry under swapping sides") {
    DiscreteMeasure a(1), b(1);
    a.add({0.0}, 1.0).add({0.4}, 2.0);
    b.add({1.0}, 0.5).add({3.0}, 0.25);
    auto ab = decompose_supports(a, b);
    auto ba = decompose_supports(b, a);
    CHECK(ab.near0 == ba.near1);
    CHECK(ab.far1 == ba.far0);
  }
  SECTION("near and far masses partition the total") {
    DiscreteMeasure a(1), b(1);
    a.add({0.0}, 1.25).add({0.4}, 2.5).add({9.0}, 0.125);
    b.add({1.0}, 0.5);
    auto dec = decompose_supports(a, b);
    CHECK(dec.near_mass0 + dec.far_mass0 == a.total_mass());
    CHECK(dec.near_mass1 + dec.far_mass1 == b.total_mass());
  }
  CHECK_THROWS_AS(decompose_supports(dirac({0.0}), dirac({0.0, 0.0})), DimensionMismatch);
}

TEST_CASE("reduced pairs") {
  CHECK(is_reduced(dirac({0.0}), dirac({pi / 3})) == Reduction::strongly_reduced);
  CHECK(is_reduced(dirac({0.0}), dirac({2.0})) == Reduction::not_reduced);
  // distance exactly pi/2 is far: the pi/2-neighborhood is open
  CHECK(is_reduced(dirac({0.0}), dirac({half_pi})) == Reduction::not_reduced);
}

TEST_CASE("rescaling to canonical parameters") {
  DiscreteMeasure mu(1);
  mu.add({1.0}, 2.0).add({-0.5}, 0.5);

  SECTION("canonical parameters are a no-op") {
    auto r = rescale_to_canonical(1.0, 4.0, mu);
    CHECK(r.mass_factor == 1.0);
    CHECK(tv_distance(r.measure, mu) == 0.0);
  }
  SECTION("alpha=1, beta=1 halves positions") {
    auto r = rescale_to_canonical(1.0, 1.0, dirac({1.0}));
    CHECK(r.mass_factor == 4.0);
    CHECK(r.measure.atoms[0].x[0] == 0.5);
  }
  SECTION("round trip") {
    auto r = rescale_to_canonical(0.7, 2.3, mu);
    auto back = rescale_from_canonical(r);
    REQUIRE(back.atoms.size() == mu.atoms.size());
    for (std::size_t k = 0; k < mu.atoms.size(); ++k)
      CHECK_THAT(back.atoms[k].x[0], Catch::Matchers::WithinAbs(mu.atoms[k].x[0], 1e-12));
  }
  SECTION("two-Dirac closed form under general parameters") {
    // M_{alpha,beta}(unit Diracs at distance rho) = (4/beta)(1 + 1 - 2 cos(rho sqrt(beta/(4 alpha))))
    double alpha = 2.0, beta = 3.0, rho = 0.8;
    double lambda = std::sqrt(4.0 * alpha / beta);
    double expect = 4.0 / beta * (2.0 - 2.0 * cos_trunc(half_pi, rho / lambda));
    double got = hk_distance(dirac({0.0}), dirac({rho}), alpha, beta);
    CHECK_THAT(got * got, Catch::Matchers::WithinAbs(expect, 1e-9));
  }
  CHECK_THROWS_AS(rescale_to_canonical(0.0, 4.0, mu), NonpositiveParameter);
}

TEST_CASE("grid densities to measures") {
  SECTION("uniform unit density, trapezoid weights") {
    GridDensity g(GridGeometry({{0.0, 1.0}}, {0.5}), {1.0, 1.0, 1.0});
    auto mu = grid_to_measure(g);
    REQUIRE(mu.atoms.size() == 3);
    CHECK_THAT(mu.total_mass(), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK(mu.atoms[0].mass == 0.25);
    CHECK(mu.atoms[1].mass == 0.5);
  }
  SECTION("zero density is the empty measure") {
    GridDensity g(GridGeometry({{0.0, 1.0}}, {0.5}), {0.0, 0.0, 0.0});
    CHECK(grid_to_measure(g).empty());
  }
  SECTION("single interior spike") {
    GridDensity g(GridGeometry({{0.0, 1.0}}, {0.5}), {0.0, 3.0, 0.0});
    auto mu = grid_to_measure(g);
    REQUIRE(mu.atoms.size() == 1);
    CHECK(mu.atoms[0].x[0] == 0.5);
    CHECK(mu.atoms[0].mass == 1.5);
  }
  SECTION("2-D total mass matches the exact integral of a linear density") {
    GridGeometry geom({{0.0, 1.0}, {0.0, 2.0}}, {0.25, 0.25});
    GridDensity g(geom, std::vector<double>(geom.size(), 0.0));
    for (std::size_t k = 0; k < geom.size(); ++k) {
      Vec x = geom.node(k);
      g.values[k] = 1.0 + x[0] + 0.5 * x[1];
    }
    // trapezoid rule is exact on per-cell multilinear integrands
    CHECK_THAT(grid_to_measure(g).total_mass(), Catch::Matchers::WithinAbs(2.0 * (1.5 + 0.5), 1e-12));
  }
}
