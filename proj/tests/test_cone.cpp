#include <catch2/catch_amalgamated.hpp>

#include "hk/cone.hpp"
#include "hk/let.hpp"

using namespace hk;

namespace {

ConePoint cp(std::initializer_list<double> x, double r) { return ConePoint(Vec(x), r); }

SplitMix64 rng(0xC0FFEE);

ConePoint random_point(int d, double max_sep = 1.0) {
  Vec x(d);
  for (auto& v : x) v = rng.uniform(-max_sep, max_sep);
  return ConePoint(x, rng.uniform(0.05, 2.0));
}

}  // namespace

TEST_CASE("cone distance basics") {
  auto a = cp({0.3, -0.2}, 1.0);
  CHECK(cone_distance(a, a, half_pi) == 0.0);

  // unit radii at separation pi/3: 1 + 1 - 2 cos(pi/3) = 1
  auto b = cp({0.0}, 1.0);
  auto c = cp({pi / 3}, 1.0);
  CHECK_THAT(cone_distance(b, c, half_pi), Catch::Matchers::WithinAbs(1.0, 1e-15));

  // cosine truncates to zero at separation >= pi/2
  auto far = cp({2.0}, 1.0);
  CHECK_THAT(cone_distance(b, far, half_pi), Catch::Matchers::WithinAbs(std::sqrt(2.0), 1e-15));

  // vertex identification: all radius-zero points are the same point
  auto v1 = cp({5.0}, 0.0);
  auto v2 = cp({-3.0}, 0.0);
  CHECK(cone_distance(v1, v2, pi) == 0.0);
  CHECK(cone_equal(v1, v2));

  CHECK_THROWS_AS(cone_distance(b, c, 0.0), DomainError);
}

TEST_CASE("cone distance is a metric on random triples") {
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_point(2), b = random_point(2), c = random_point(2);
    for (double cutoff : {pi, half_pi}) {
      double ab = cone_distance(a, b, cutoff);
      double bc = cone_distance(b, c, cutoff);
      double ac = cone_distance(a, c, cutoff);
      CHECK(ab == cone_distance(b, a, cutoff));
      CHECK(ac <= ab + bc + 1e-12);
    }
  }
}

TEST_CASE("cone geodesic endpoints and branches") {
  auto z = cp({0.4}, 2.0);
  auto vertex = ConePoint::vertex(1);

  SECTION("vertex branch is linear in the radius") {
    auto mid = cone_geodesic(vertex, z, 0.5);
    CHECK(mid.r == 1.0);
    CHECK(mid.x == z.x);
  }

  SECTION("pure dilation") {
    auto mid = cone_geodesic(cp({0.4}, 1.0), cp({0.4}, 3.0), 0.5);
    CHECK_THAT(mid.r, Catch::Matchers::WithinAbs(2.0, 1e-15));
    CHECK_THAT(mid.x[0], Catch::Matchers::WithinAbs(0.4, 1e-15));
  }

  SECTION("separation >= pi/2 with positive radii is rejected") {
    CHECK_THROWS_AS(cone_geodesic(cp({0.0}, 1.0), cp({1.8}, 1.0), 0.5), DegenerateGeodesic);
  }
}

TEST_CASE("cone geodesic is constant speed") {
  // the documented pi/3 midpoint
  auto a = cp({0.0}, 1.0);
  auto b = cp({pi / 3}, 1.0);
  auto mid = cone_geodesic(a, b, 0.5);
  double u = std::cos(pi / 3) - 1.0;
  double v = std::sin(pi / 3);
  CHECK_THAT(mid.r, Catch::Matchers::WithinAbs(
                        std::sqrt((1 + 0.5 * u) * (1 + 0.5 * u) + 0.25 * v * v), 1e-14));
  CHECK_THAT(cone_distance(a, mid, pi), Catch::Matchers::WithinAbs(0.5 * cone_distance(a, b, pi), 1e-13));

  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_point(2, 0.5);
    auto q = random_point(2, 0.5);
    if (dist(p.x, q.x) >= half_pi) continue;
    double total = cone_distance(p, q, pi);
    double s = rng.uniform(), t = rng.uniform();
    auto gs = cone_geodesic(p, q, s);
    auto gt = cone_geodesic(p, q, t);
    CHECK_THAT(cone_distance(gs, gt, pi), Catch::Matchers::WithinAbs(std::abs(t - s) * total, 1e-12));
  }
}

TEST_CASE("homogeneous projection") {
  int d = 1;
  SECTION("r^2 scaling") {
    ConeMeasure lifted{{cp({0.7}, 2.0), 1.0}};
    auto mu = homogeneous_projection(lifted, d);
    REQUIRE(mu.atoms.size() == 1);
    CHECK(mu.atoms[0].mass == 4.0);
  }
  SECTION("vertex annihilates") {
    ConeMeasure lifted{{ConePoint::vertex(d), 5.0}};
    CHECK(homogeneous_projection(lifted, d).empty());
  }
  SECTION("atom merging") {
    ConeMeasure lifted{{cp({0.7}, 1.0), 1.0}, {cp({0.7}, 1.0), 1.0}};
    auto mu = homogeneous_projection(lifted, d).merged();
    REQUIRE(mu.atoms.size() == 1);
    CHECK(mu.atoms[0].mass == 2.0);
  }
  SECTION("projection undoes the canonical lift") {
    DiscreteMeasure mu(2);
    mu.add({0.1, 0.2}, 0.7).add({-0.4, 0.9}, 1.3);
    auto back = homogeneous_projection(canonical_lift(mu), 2);
    CHECK(tv_distance(mu, back) == 0.0);
  }
}

TEST_CASE("dilation-transport action") {
  DiscreteMeasure nu(1);
  nu.add({0.0}, 1.0).add({1.0}, 2.0);

  SECTION("identity and q^2 scaling") {
    CHECK(tv_distance(dilation_transport_apply(DilationTransportPair::identity(), nu), nu) == 0.0);
    DilationTransportPair doubled{[](const Vec& x) { return x; }, [](const Vec&) { return 2.0; }};
    auto out = dilation_transport_apply(doubled, nu);
    CHECK_THAT(out.total_mass(), Catch::Matchers::WithinAbs(4.0 * nu.total_mass(), 1e-15));
  }

  SECTION("zero dilation drops atoms") {
    DilationTransportPair kill{[](const Vec& x) { return x; }, [](const Vec& x) {
                                 return x[0] > 0.5 ? 0.0 : 1.0;
                               }};
    auto out = dilation_transport_apply(kill, nu);
    REQUIRE(out.atoms.size() == 1);
    CHECK(out.atoms[0].x[0] == 0.0);
  }

  SECTION("composition rule") {
    DilationTransportPair first{[](const Vec& x) { return Vec{x[0] + 0.3}; },
                                [](const Vec& x) { return 1.0 + 0.5 * x[0] * x[0]; }};
    DilationTransportPair second{[](const Vec& x) { return Vec{2.0 * x[0]}; },
                                 [](const Vec& x) { return std::exp(-0.1 * x[0]); }};
    auto sequential = dilation_transport_apply(second, dilation_transport_apply(first, nu));
    auto composed = dilation_transport_apply(compose(second, first), nu);
    CHECK(tv_distance(sequential, composed) < 1e-12);
  }
}

TEST_CASE("monge cost") {
  DiscreteMeasure mu0 = dirac({0.0});

  CHECK(monge_cost(DilationTransportPair::identity(), mu0) == 0.0);

  DilationTransportPair shift{[](const Vec& x) { return Vec{x[0] + pi / 3}; },
                              [](const Vec&) { return 1.0; }};
  CHECK_THAT(monge_cost(shift, mu0), Catch::Matchers::WithinAbs(1.0, 1e-15));

  SECTION("upper bound for HK^2 on random pairs") {
    for (int trial = 0; trial < 25; ++trial) {
      DiscreteMeasure src(1);
      src.add({rng.uniform(-0.5, 0.5)}, rng.uniform(0.2, 1.5));
      src.add({rng.uniform(-0.5, 0.5)}, rng.uniform(0.2, 1.5));
      double shift_by = rng.uniform(-0.6, 0.6);
      double dil = rng.uniform(0.4, 1.8);
      DilationTransportPair pair{[=](const Vec& x) { return Vec{x[0] + shift_by}; },
                                 [=](const Vec&) { return dil; }};
      auto dst = dilation_transport_apply(pair, src);
      double cost = monge_cost(pair, src);
      double hk2 = solve_let(src, dst).hk_squared;
      CHECK(cost >= hk2 - 1e-9);
    }
  }

  SECTION("optimal pair between unit Diracs at pi/3 attains HK^2") {
    DiscreteMeasure mu1 = dirac({pi / 3});
    auto sol = solve_let(mu0, mu1);
    // sigma0 = sigma1 = 1/2; the optimal map dilates by sigma0/sigma1 = 1
    DilationTransportPair opt{[](const Vec&) { return Vec{pi / 3}; },
                              [](const Vec&) { return 1.0; }};
    CHECK_THAT(monge_cost(opt, mu0), Catch::Matchers::WithinAbs(sol.hk_squared, 1e-9));
  }
}
