#pragma once

#include "hk/common.hpp"
#include "hk/cone.hpp"
#include "hk/hopf_lax.hpp"
#include "hk/let.hpp"
#include "hk/measure.hpp"

namespace hk {

// ---------------------------------------------------------------------------
// HK geodesics in Lagrangian form: a list of lifted cone pairs from an
// optimal plan. Sampling projects the per-pair cone geodesics, so there is
// no time discretization anywhere.
// ---------------------------------------------------------------------------

struct GeodesicCurve {
  int dimension = 0;
  std::vector<LiftedPair> pairs;
  double hk_squared = 0.0;
  DiscreteMeasure mu0, mu1;
};

inline double pair_cost(const LiftedPair& p) {
  double dsq = cone_distance(p.a, p.b, half_pi);
  return p.weight * dsq * dsq;
}

inline GeodesicCurve build_geodesic(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                    const LetOptions& opt = {}) {
  GeodesicCurve curve;
  curve.dimension = mu0.empty() ? mu1.dimension : mu0.dimension;
  curve.mu0 = mu0;
  curve.mu1 = mu1;

  LetSolution sol = solve_let(mu0, mu1, opt);
  curve.hk_squared = sol.hk_squared;
  if (!mu0.empty() && !mu1.empty()) {
    curve.pairs = lift_plan_to_cone(sol.plan, mu0, mu1, opt.tolerance);
  } else {
    ConePoint vertex = ConePoint::vertex(curve.dimension);
    for (const auto& a : mu0.atoms) curve.pairs.push_back({ConePoint(a.x, 1.0), vertex, a.mass});
    for (const auto& a : mu1.atoms) curve.pairs.push_back({vertex, ConePoint(a.x, 1.0), a.mass});
  }

  // pi/2 threshold: optimal plans carry no transport across or beyond pi/2
  for (const auto& p : curve.pairs) {
    if (!p.a.is_vertex() && !p.b.is_vertex() && dist(p.a.x, p.b.x) >= half_pi)
      throw DegenerateGeodesic("optimal lift pairs interior points at separation >= pi/2");
  }
  return curve;
}

inline DiscreteMeasure sample(const GeodesicCurve& curve, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("geodesic parameter must lie in [0,1]");
  ConeMeasure lifted;
  lifted.reserve(curve.pairs.size());
  for (const auto& p : curve.pairs) lifted.push_back({cone_geodesic(p.a, p.b, t), p.weight});
  return homogeneous_projection(lifted, curve.dimension).merged();
}

// Restriction: reweight each pair by a factor read off at its time-s
// position. Weights are matched against the provided per-atom table.
inline GeodesicCurve restrict_geodesic(const GeodesicCurve& curve, double s,
                                       const std::vector<std::pair<Vec, double>>& rho_s,
                                       double position_tol = 1e-9) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("restriction time must lie in (0,1)");
  GeodesicCurve out;
  out.dimension = curve.dimension;
  out.hk_squared = 0.0;
  for (const auto& p : curve.pairs) {
    Vec xs = cone_geodesic(p.a, p.b, s).x;
    double factor = -1.0;
    for (const auto& [pos, w] : rho_s)
      if (dist(pos, xs) <= position_tol) {
        factor = w;
        break;
      }
    if (factor < 0.0) throw UndefinedWeight("restriction weight undefined at a support point");
    if (factor == 0.0) continue;
    LiftedPair q = p;
    q.weight *= factor;
    out.pairs.push_back(q);
    out.hk_squared += pair_cost(q);
  }
  out.mu0 = sample(out, 0.0);
  out.mu1 = sample(out, 1.0);
  return out;
}

// Split along a partition of the time-s support; the parts sum to the whole
// exactly in atom weights and stay disjoint for t in (0,1).
inline std::pair<GeodesicCurve, GeodesicCurve> split_singular(
    const GeodesicCurve& curve, double s, const std::vector<std::size_t>& part_a,
    const std::vector<std::size_t>& part_b) {
  DiscreteMeasure mus = sample(curve, s);
  std::vector<int> label(mus.atoms.size(), -1);
  for (std::size_t i : part_a) {
    if (i >= label.size() || label[i] != -1) throw NotAPartition("split_singular: bad index set A");
    label[i] = 0;
  }
  for (std::size_t i : part_b) {
    if (i >= label.size() || label[i] != -1) throw NotAPartition("split_singular: bad index set B");
    label[i] = 1;
  }
  for (int l : label)
    if (l == -1) throw NotAPartition("split_singular: sets do not cover the support");

  GeodesicCurve a, b;
  a.dimension = b.dimension = curve.dimension;
  for (const auto& p : curve.pairs) {
    Vec xs = cone_geodesic(p.a, p.b, s).x;
    std::size_t owner = 0;
    double best = inf;
    for (std::size_t i = 0; i < mus.atoms.size(); ++i) {
      double r = dist(mus.atoms[i].x, xs);
      if (r < best) {
        best = r;
        owner = i;
      }
    }
    GeodesicCurve& dst = (label[owner] == 0) ? a : b;
    dst.pairs.push_back(p);
    dst.hk_squared += pair_cost(p);
  }
  for (GeodesicCurve* c : {&a, &b}) {
    c->mu0 = sample(*c, 0.0);
    c->mu1 = sample(*c, 1.0);
  }
  return {a, b};
}

// ---------------------------------------------------------------------------
// Eulerian density transport along a grid flow. The context holds the
// potential xi_s on the grid; densities move by
//   c(t, T_{s->t}(x)) = c(s, x) alpha_s(t, x) / delta_s(t, x)
// with alpha = q^2 and delta = det DT, DT from the explicit differential of
// the transport map.
// ---------------------------------------------------------------------------

struct GridFlowContext {
  GridFunction xi_s;
  double s = 0.0;
};

struct FlowNodeState {
  Vec T;
  double alpha = 1.0;
  double delta = 1.0;
};

inline Vec transport_position(const GridFlowContext& ctx, double t, std::size_t node) {
  double tau = t - ctx.s;
  double xi = ctx.xi_s.values[node];
  if (!std::isfinite(xi)) throw VertexRegion("transport_position: potential not finite at node");
  double den = 1.0 + 2.0 * tau * xi;
  if (den <= 0.0) throw VertexRegion("transport_position: 1 + 2 tau xi <= 0");
  Vec g = ctx.xi_s.gradient(node);
  return add(ctx.xi_s.geom.node(node), arctan_vec(scale(tau / den, g)));
}

// Jacobian of the transport map by central differences of the mapped
// neighbor nodes. Plans solved at grid resolution give potentials that are
// only piecewise smooth (the partner pattern shifts every few nodes), so
// differencing the map is stable where pointwise second derivatives of the
// potential are not.
inline FlowNodeState flow_node_state(const GridFlowContext& ctx, double t, std::size_t node) {
  const GridGeometry& geom = ctx.xi_s.geom;
  int d = geom.dimension();
  double tau = t - ctx.s;
  double xi = ctx.xi_s.values[node];
  if (!std::isfinite(xi)) throw VertexRegion("flow_node_state: potential not finite at node");
  double den = 1.0 + 2.0 * tau * xi;
  if (den <= 0.0) throw VertexRegion("flow_node_state: 1 + 2 tau xi <= 0");
  Vec g = ctx.xi_s.gradient(node);

  FlowNodeState st;
  st.T = add(geom.node(node), arctan_vec(scale(tau / den, g)));
  st.alpha = den * den + tau * tau * dot(g, g);

  Mat J(d);
  std::vector<int> idx = geom.multi(node);
  for (int k = 0; k < d; ++k) {
    std::vector<int> lo = idx, hi = idx;
    lo[k] = std::max(idx[k] - 1, 0);
    hi[k] = std::min(idx[k] + 1, geom.shape[k] - 1);
    double span = (hi[k] - lo[k]) * geom.spacing[k];
    Vec Tlo = transport_position(ctx, t, geom.flat(lo));
    Vec Thi = transport_position(ctx, t, geom.flat(hi));
    for (int r = 0; r < d; ++r) J(r, k) = (Thi[r] - Tlo[r]) / span;
  }
  st.delta = J.det();
  return st;
}

// Push a density from time s to time t. Output is resampled onto the input
// grid (1-D, where the pushed nodes stay ordered because delta > 0); for a
// spatially constant potential the map is the identity in any dimension.
inline GridDensity density_along_flow(const GridFlowContext& ctx, const GridDensity& c_s,
                                      double t) {
  if (!ctx.xi_s.geom.same_as(c_s.geom)) throw DimensionMismatch("density_along_flow: grids differ");
  int d = c_s.geom.dimension();

  bool constant_potential = true;
  for (std::size_t n = 0; n + 1 < ctx.xi_s.values.size() && constant_potential; ++n)
    if (std::abs(ctx.xi_s.values[n] - ctx.xi_s.values[n + 1]) > 1e-14) constant_potential = false;

  if (constant_potential) {
    double tau = t - ctx.s;
    double den = 1.0 + 2.0 * tau * ctx.xi_s.values[0];
    if (den <= 0.0) throw VertexRegion("density_along_flow: 1 + 2 tau xi <= 0");
    std::vector<double> vals = c_s.values;
    for (auto& v : vals) v *= den * den;  // alpha = den^2, delta = 1, T = id
    return GridDensity(c_s.geom, vals);
  }

  if (d != 1)
    throw DomainError("density_along_flow: grid resampling implemented for d = 1 "
                      "(use flow_node_state for Lagrangian evaluation in higher dimension)");

  std::size_t n = c_s.values.size();
  std::vector<double> pos(n), val(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (c_s.values[k] == 0.0) {
      // still need the mapped position for interpolation support
    }
    FlowNodeState st = flow_node_state(ctx, t, k);
    if (st.delta <= 0.0) throw DegenerateJacobian("density_along_flow: det DT <= 0");
    pos[k] = st.T[0];
    val[k] = c_s.values[k] * st.alpha / st.delta;
  }
  for (std::size_t k = 0; k + 1 < n; ++k)
    if (!(pos[k + 1] > pos[k])) throw DegenerateJacobian("density_along_flow: map not monotone");

  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double x = c_s.geom.node(k)[0];
    if (x <= pos.front() || x >= pos.back()) {
      out[k] = 0.0;
      if (std::abs(x - pos.front()) < 1e-15) out[k] = val.front();
      if (std::abs(x - pos.back()) < 1e-15) out[k] = val.back();
      continue;
    }
    std::size_t hi = std::upper_bound(pos.begin(), pos.end(), x) - pos.begin();
    std::size_t lo = hi - 1;
    double w = (x - pos[lo]) / (pos[hi] - pos[lo]);
    out[k] = (1.0 - w) * val[lo] + w * val[hi];
  }
  return GridDensity(c_s.geom, out);
}

// Mass of the pushed density, computed in Lagrangian form (exact change of
// variables, no resampling): integral of c_s alpha over the grid.
inline double flow_mass(const GridFlowContext& ctx, const GridDensity& c_s, double t) {
  double m = 0.0;
  for (std::size_t k = 0; k < c_s.values.size(); ++k) {
    if (c_s.values[k] == 0.0) continue;
    FlowNodeState st = flow_node_state(ctx, t, k);
    m += c_s.values[k] * st.alpha * c_s.geom.quadrature_weight(k);
  }
  return m;
}

struct DensityProfile {
  bool is_convex = false;
  bool is_constant = false;
  std::vector<std::pair<double, double>> profile;  // (t, c(t, T_{s->t}(x)))
  double worst_second_difference = 0.0;
};

// Density along the flow through one node: either constant or strictly
// convex; tested by discrete second differences.
inline DensityProfile check_density_convexity(const GridFlowContext& ctx, const GridDensity& c_s,
                                              std::size_t node, const std::vector<double>& times,
                                              double tolerance) {
  DensityProfile out;
  double c0 = c_s.values[node];
  for (double t : times) {
    FlowNodeState st = flow_node_state(ctx, t, node);
    if (st.delta <= 0.0) throw DegenerateJacobian("check_density_convexity: det DT <= 0");
    out.profile.push_back({t, c0 * st.alpha / st.delta});
  }
  double worst = 0.0, spread = 0.0;
  for (std::size_t k = 1; k + 1 < out.profile.size(); ++k) {
    double dd = out.profile[k + 1].second - 2.0 * out.profile[k].second + out.profile[k - 1].second;
    worst = std::min(worst, dd);
    spread = std::max(spread, std::abs(out.profile[k].second - out.profile[0].second));
  }
  out.worst_second_difference = worst;
  out.is_convex = worst >= -tolerance;
  out.is_constant = spread <= tolerance;
  return out;
}

struct LinfReport {
  double max_violation = 0.0;
  std::vector<std::pair<double, double>> sup_norm;  // (t, max density)
};

// Chord bound on the sup norm: ||c_t|| <= (1-t)||c_0|| + t||c_1||, evaluated
// in Lagrangian form over support nodes.
inline LinfReport linf_convexity_check(const GridFlowContext& ctx, const GridDensity& c_s,
                                       const std::vector<double>& times, double tolerance) {
  auto sup_at = [&](double t) {
    double m = 0.0;
    for (std::size_t k = 0; k < c_s.values.size(); ++k) {
      if (c_s.values[k] == 0.0) continue;
      FlowNodeState st = flow_node_state(ctx, t, k);
      if (st.delta <= 0.0) throw DegenerateJacobian("linf_convexity_check: det DT <= 0");
      m = std::max(m, c_s.values[k] * st.alpha / st.delta);
    }
    return m;
  };
  double sup0 = sup_at(0.0), sup1 = sup_at(1.0);
  LinfReport rep;
  for (double t : times) {
    double v = sup_at(t);
    rep.sup_norm.push_back({t, v});
    rep.max_violation = std::max(rep.max_violation, v - ((1.0 - t) * sup0 + t * sup1) - tolerance);
  }
  rep.max_violation = std::max(rep.max_violation, 0.0);
  return rep;
}

}  // namespace hk
