#pragma once

#include "hk/common.hpp"
#include "hk/cone.hpp"
#include "hk/grid.hpp"
#include "hk/let.hpp"
#include "hk/measure.hpp"

namespace hk {

// ---------------------------------------------------------------------------
// Dual potentials. The pair (phi0, phi1) solves the static dual problem; the
// transformed pair (xi0, xi1) with xi0 = (e^{2 tau phi0} - 1)/(2 tau) and
// xi1 = (1 - e^{-2 tau phi1})/(2 tau) linearizes the dual integrands.
// Extended values are explicit IEEE infinities, never large floats.
// ---------------------------------------------------------------------------

struct PotentialPair {
  double tau = 1.0;
  std::vector<double> phi0, xi0;  // per atom of mu0
  std::vector<double> phi1, xi1;  // per atom of mu1
  double dual_value = 0.0;        // sum xi1 dmu1 - sum xi0 dmu0 = HK^2/(2 tau)
};

// Potentials of an optimal plan per the optimality conditions: built from the
// marginal densities sigma_i, with the far/unmatched convention
// phi1 = +inf, xi1 = 1/(2 tau) and phi0 = -inf, xi0 = -1/(2 tau).
inline PotentialPair potentials_from_plan(const TransportPlan& plan, const DiscreteMeasure& mu0,
                                          const DiscreteMeasure& mu1, double tau = 1.0,
                                          double tolerance = 1e-6) {
  if (!(tau > 0.0)) throw NonpositiveParameter("tau must be positive");
  OptimalityCertificate cert = detail::certify_plan(
      mu0, mu1, detail::pair_distances(mu0, mu1), plan, let_objective(plan, mu0, mu1));
  if (!cert.within(10.0 * tolerance))
    throw NotOptimal("potentials_from_plan requires an optimal plan");

  PotentialPair out;
  out.tau = tau;
  out.phi0.resize(mu0.atoms.size());
  out.xi0.resize(mu0.atoms.size());
  out.phi1.resize(mu1.atoms.size());
  out.xi1.resize(mu1.atoms.size());
  double sigma_floor = 1e-12;
  for (std::size_t i = 0; i < mu0.atoms.size(); ++i) {
    double s = plan.sigma0[i];
    if (s > sigma_floor) {
      out.phi0[i] = 0.5 / tau * std::log(s);
      out.xi0[i] = (s - 1.0) / (2.0 * tau);
    } else {
      out.phi0[i] = -inf;
      out.xi0[i] = -0.5 / tau;
    }
  }
  for (std::size_t j = 0; j < mu1.atoms.size(); ++j) {
    double s = plan.sigma1[j];
    if (s > sigma_floor) {
      out.phi1[j] = -0.5 / tau * std::log(s);
      out.xi1[j] = (1.0 - s) / (2.0 * tau);
    } else {
      out.phi1[j] = inf;
      out.xi1[j] = 0.5 / tau;
    }
  }
  for (std::size_t j = 0; j < mu1.atoms.size(); ++j) out.dual_value += out.xi1[j] * mu1.atoms[j].mass;
  for (std::size_t i = 0; i < mu0.atoms.size(); ++i) out.dual_value -= out.xi0[i] * mu0.atoms[i].mass;
  return out;
}

// ---------------------------------------------------------------------------
// L-transforms on finite point sets for the cost L_tau(z) = l(|z|)/(2 tau),
// which is finite exactly on the open ball of radius pi/2.
// ---------------------------------------------------------------------------

struct PointPotential {
  std::vector<Vec> points;
  std::vector<double> values;  // extended reals
};

inline double cost_L_tau(double r, double tau) { return cost_L1(r) / tau; }

// phi0^{L->}(x1) = inf over x0 within pi/2 of x1 of phi0(x0) + L_tau(x1-x0);
// +inf when no point of the source set lies within pi/2.
inline PointPotential forward_L_transform(const PointPotential& phi0,
                                          const std::vector<Vec>& query, double tau = 1.0) {
  PointPotential out;
  out.points = query;
  out.values.assign(query.size(), inf);
  for (std::size_t b = 0; b < query.size(); ++b) {
    double best = inf;
    for (std::size_t a = 0; a < phi0.points.size(); ++a) {
      double r = dist(query[b], phi0.points[a]);
      if (r >= half_pi) continue;
      double v = phi0.values[a];
      if (v == inf) continue;  // contributes nothing to an infimum of +inf terms
      double cand = (v == -inf) ? -inf : v + cost_L_tau(r, tau);
      best = std::min(best, cand);
    }
    out.values[b] = best;
  }
  return out;
}

// phi1^{<-L}(x0) = sup over x1 within pi/2 of phi1(x1) - L_tau(x1-x0);
// mirrors the forward transform via phi0^{L->} = -(-phi0)^{<-L}.
inline PointPotential backward_L_transform(const PointPotential& phi1,
                                           const std::vector<Vec>& query, double tau = 1.0) {
  PointPotential neg{phi1.points, phi1.values};
  for (auto& v : neg.values) v = -v;
  PointPotential fwd = forward_L_transform(neg, query, tau);
  for (auto& v : fwd.values) v = -v;
  return fwd;
}

struct TightnessReport {
  bool is_tight = false;
  double max_gap = 0.0;
};

// Check phi0 = phi1^{<-L} on the phi0 point set and phi1 = phi0^{L->} on the
// phi1 point set. Matching infinities compare as equal.
inline TightnessReport check_tightness(const PointPotential& phi0, const PointPotential& phi1,
                                       double tau = 1.0, double tolerance = 1e-9) {
  auto gap = [](double got, double want) {
    if (std::isinf(got) || std::isinf(want)) return (got == want) ? 0.0 : inf;
    return std::abs(got - want);
  };
  double worst = 0.0;
  PointPotential back = backward_L_transform(phi1, phi0.points, tau);
  for (std::size_t k = 0; k < phi0.points.size(); ++k)
    worst = std::max(worst, gap(back.values[k], phi0.values[k]));
  PointPotential fwd = forward_L_transform(phi0, phi1.points, tau);
  for (std::size_t k = 0; k < phi1.points.size(); ++k)
    worst = std::max(worst, gap(fwd.values[k], phi1.values[k]));
  return {worst <= tolerance, worst};
}

// ---------------------------------------------------------------------------
// Monge map from a Kantorovich potential xi0 on a grid:
//   T(x) = x + arctan(grad xi0 / (1 + 2 xi0)),  q^2 = (1 + 2 xi0)^2 + |grad|^2.
// ---------------------------------------------------------------------------

inline DilationTransportPair monge_map_from_potential(const GridFunction& xi0) {
  auto grid = std::make_shared<GridFunction>(xi0);
  auto eval = [grid](const Vec& x) {
    GridPotentialEvaluator ev{grid.get()};
    double v = ev.value(x);
    if (1.0 + 2.0 * v <= 0.0)
      throw VertexRegion("monge_map_from_potential: 1 + 2 xi0 <= 0 at query point");
    return std::pair<double, Vec>(v, ev.grad(x));
  };
  DilationTransportPair pair;
  pair.T = [eval](const Vec& x) {
    auto [v, g] = eval(x);
    return add(x, arctan_vec(scale(1.0 / (1.0 + 2.0 * v), g)));
  };
  pair.q = [eval](const Vec& x) {
    auto [v, g] = eval(x);
    double a = 1.0 + 2.0 * v;
    return std::sqrt(a * a + dot(g, g));
  };
  return pair;
}

}  // namespace hk
