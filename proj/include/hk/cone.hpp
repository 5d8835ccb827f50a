#pragma once

#include <map>

#include "hk/common.hpp"
#include "hk/measure.hpp"

namespace hk {

// ---------------------------------------------------------------------------
// Points on the cone over R^d: equivalence classes [x, r] with all (x, 0)
// identified with the vertex.
// ---------------------------------------------------------------------------

struct ConePoint {
  Vec x;
  double r = 0.0;

  ConePoint() = default;
  ConePoint(Vec pos, double radius) : x(std::move(pos)), r(radius) {
    if (!(r >= 0.0)) throw Error("cone radius must be nonnegative");
  }

  static ConePoint vertex(int dimension) { return ConePoint(Vec(dimension, 0.0), 0.0); }

  bool is_vertex() const { return r == 0.0; }
  int dimension() const { return static_cast<int>(x.size()); }
};

inline bool cone_equal(const ConePoint& a, const ConePoint& b, double tol = 0.0) {
  if (a.is_vertex() && b.is_vertex()) return true;
  return std::abs(a.r - b.r) <= tol && dist(a.x, b.x) <= tol;
}

// Truncated cone metric d_{a,C}, cutoff in (0, pi].
inline double cone_distance(const ConePoint& a, const ConePoint& b, double cutoff = pi) {
  if (!(cutoff > 0.0 && cutoff <= pi)) throw DomainError("cone metric cutoff must lie in (0, pi]");
  double c = (a.is_vertex() || b.is_vertex()) ? 0.0 : cos_trunc(cutoff, dist(a.x, b.x));
  double dd = a.r * a.r + b.r * b.r - 2.0 * a.r * b.r * c;
  return std::sqrt(std::max(dd, 0.0));
}

// Constant-speed geodesic on (C, d_pi) between a and b, evaluated at t.
// Vertex endpoints interpolate linearly in the radius; for two interior
// points the separation must stay below pi/2 (plans arising from the
// transport problem never pair interior points further apart).
inline ConePoint cone_geodesic(const ConePoint& a, const ConePoint& b, double t) {
  if (a.is_vertex() && b.is_vertex()) return a.dimension() ? a : b;
  if (a.is_vertex()) return ConePoint(b.x, t * b.r);
  if (b.is_vertex()) return ConePoint(a.x, (1.0 - t) * a.r);

  double sep = dist(a.x, b.x);
  if (sep >= half_pi)
    throw DegenerateGeodesic("interior cone points separated by >= pi/2 (no transport branch)");

  double ratio = b.r / a.r;
  double u = ratio * std::cos(sep) - 1.0;
  Vec v = scale(ratio, sin_vec(sub(b.x, a.x)));
  double vv = dot(v, v);
  double rt = a.r * std::sqrt((1.0 + t * u) * (1.0 + t * u) + t * t * vv);
  Vec xt = add(a.x, arctan_vec(scale(t / (1.0 + t * u), v)));
  return ConePoint(std::move(xt), rt);
}

// ---------------------------------------------------------------------------
// Lifted measures (finite atom lists on the cone) and the homogeneous
// projection h: weights get multiplied by r^2, vertex atoms vanish.
// ---------------------------------------------------------------------------

struct ConeAtom {
  ConePoint point;
  double weight = 0.0;
};

using ConeMeasure = std::vector<ConeAtom>;

inline DiscreteMeasure homogeneous_projection(const ConeMeasure& lifted, int dimension) {
  std::vector<Atom> atoms;
  atoms.reserve(lifted.size());
  for (const auto& a : lifted) {
    if (a.point.is_vertex()) continue;
    double m = a.weight * a.point.r * a.point.r;
    if (m == 0.0) continue;
    atoms.push_back({a.point.x, m});
  }
  return DiscreteMeasure(dimension, std::move(atoms));
}

// Canonical lift mu (x) delta_1 of a measure on R^d.
inline ConeMeasure canonical_lift(const DiscreteMeasure& mu) {
  ConeMeasure lifted;
  lifted.reserve(mu.atoms.size());
  for (const auto& a : mu.atoms) lifted.push_back({ConePoint(a.x, 1.0), a.mass});
  return lifted;
}

// ---------------------------------------------------------------------------
// Dilation-transport pairs (T, q) acting by (T, q)* mu = T_push(q^2 mu).
// ---------------------------------------------------------------------------

struct DilationTransportPair {
  std::function<Vec(const Vec&)> T;
  std::function<double(const Vec&)> q;

  static DilationTransportPair identity() {
    return {[](const Vec& x) { return x; }, [](const Vec&) { return 1.0; }};
  }
};

// Composition rule: (T2, q2)* (T1, q1)* nu = (T2 o T1, (q2 o T1) q1)* nu.
inline DilationTransportPair compose(const DilationTransportPair& outer,
                                     const DilationTransportPair& inner) {
  return {[=](const Vec& x) { return outer.T(inner.T(x)); },
          [=](const Vec& x) { return outer.q(inner.T(x)) * inner.q(x); }};
}

inline DiscreteMeasure dilation_transport_apply(const DilationTransportPair& pair,
                                                const DiscreteMeasure& nu) {
  std::vector<Atom> atoms;
  atoms.reserve(nu.atoms.size());
  for (const auto& a : nu.atoms) {
    double qv = pair.q(a.x);
    if (!(qv >= 0.0)) throw Error("dilation factor q must be nonnegative");
    if (qv == 0.0) continue;
    atoms.push_back({pair.T(a.x), qv * qv * a.mass});
  }
  return DiscreteMeasure(nu.dimension, std::move(atoms));
}

// Monge cost of a pair against mu0:
//   integral of 1 + q^2 - 2 q cos_{pi/2}(|T(x) - x|) d mu0.
// Always an upper bound for HK^2(mu0, (T,q)* mu0).
inline double monge_cost(const DilationTransportPair& pair, const DiscreteMeasure& mu0) {
  double total = 0.0;
  for (const auto& a : mu0.atoms) {
    double qv = pair.q(a.x);
    double c = cos_trunc(half_pi, dist(pair.T(a.x), a.x));
    total += a.mass * (1.0 + qv * qv - 2.0 * qv * c);
  }
  return total;
}

}  // namespace hk
