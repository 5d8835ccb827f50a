#pragma once

#include <memory>

#include "hk/common.hpp"
#include "hk/grid.hpp"

namespace hk {

// ---------------------------------------------------------------------------
// Small dense matrices (d is 1..3 in practice).
// ---------------------------------------------------------------------------

struct Mat {
  int d = 0;
  std::vector<double> a;  // row-major d*d

  Mat() = default;
  explicit Mat(int dim, double diag = 0.0) : d(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {
    for (int k = 0; k < d; ++k) (*this)(k, k) = diag;
  }
  static Mat identity(int dim) { return Mat(dim, 1.0); }

  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * d + c]; }
  double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * d + c]; }

  Mat mul(const Mat& o) const {
    Mat out(d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += (*this)(r, k) * o(k, c);
        out(r, c) = s;
      }
    return out;
  }

  Vec mul(const Vec& v) const {
    Vec out(d, 0.0);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) out[r] += (*this)(r, c) * v[c];
    return out;
  }

  Mat scaled(double c) const {
    Mat out = *this;
    for (auto& v : out.a) v *= c;
    return out;
  }

  Mat plus(const Mat& o) const {
    Mat out = *this;
    for (std::size_t k = 0; k < a.size(); ++k) out.a[k] += o.a[k];
    return out;
  }

  double trace() const {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += (*this)(k, k);
    return s;
  }

  double frob2() const {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
  }

  double det() const {
    if (d == 1) return a[0];
    if (d == 2) return a[0] * a[3] - a[1] * a[2];
    Mat m = *this;  // Gaussian elimination with partial pivoting
    double sign = 1.0, product = 1.0;
    for (int col = 0; col < d; ++col) {
      int piv = col;
      for (int r = col + 1; r < d; ++r)
        if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
      if (m(piv, col) == 0.0) return 0.0;
      if (piv != col) {
        for (int c = 0; c < d; ++c) std::swap(m(piv, c), m(col, c));
        sign = -sign;
      }
      product *= m(col, col);
      for (int r = col + 1; r < d; ++r) {
        double f = m(r, col) / m(col, col);
        for (int c = col; c < d; ++c) m(r, c) -= f * m(col, c);
      }
    }
    return sign * product;
  }

  static Mat outer(const Vec& u, const Vec& v) {
    Mat out(static_cast<int>(u.size()));
    for (int r = 0; r < out.d; ++r)
      for (int c = 0; c < out.d; ++c) out(r, c) = u[r] * v[c];
    return out;
  }

  static Mat from_dense(int dim, const std::vector<double>& dense) {
    Mat out(dim);
    out.a = dense;
    return out;
  }
};

// ---------------------------------------------------------------------------
// Generalized Hopf--Lax flow on grids:
//   (P_t xi0)(x) = inf_y (1/2t) (1 - cos^2_{pi/2}(|x-y|) / (1 + 2 t xi0(y))).
// The infimum is evaluated exhaustively over grid nodes; the truncated-cosine
// branch contributes the constant candidate 1/(2t) (attained by any point
// beyond pi/2, which exists in the continuum regardless of the box).
// ---------------------------------------------------------------------------

namespace detail {

struct WindowOffsets {
  std::vector<long> flat;     // flat-index offsets within |offset| < pi/2
  std::vector<double> cos2;   // cos^2 of the offset length
  std::vector<std::vector<int>> delta;  // per-axis offsets, for bounds checks
};

inline WindowOffsets halfpi_window(const GridGeometry& geom) {
  WindowOffsets w;
  int d = geom.dimension();
  std::vector<int> reach(d);
  for (int k = 0; k < d; ++k)
    reach[k] = std::min(geom.shape[k] - 1, static_cast<int>(half_pi / geom.spacing[k]) + 1);
  std::vector<int> delta(d, 0);
  std::function<void(int)> rec = [&](int axis) {
    if (axis == d) {
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        double dk = delta[k] * geom.spacing[k];
        r2 += dk * dk;
      }
      double r = std::sqrt(r2);
      if (r >= half_pi) return;
      long f = 0;
      for (int k = 0; k < d; ++k) f = f * geom.shape[k] + delta[k];
      double c = std::cos(r);
      w.flat.push_back(f);
      w.cos2.push_back(c * c);
      w.delta.push_back(delta);
      return;
    }
    for (int v = -reach[axis]; v <= reach[axis]; ++v) {
      delta[axis] = v;
      rec(axis + 1);
    }
  };
  rec(0);
  return w;
}

}  // namespace detail

inline GridFunction hopf_lax_forward(const GridFunction& xi0, double t, int threads = 1) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("hopf_lax_forward needs t in [0,1]");
  if (t == 0.0) return xi0;
  for (double v : xi0.values)
    if (v < -0.5) throw InfeasiblePotential("hopf_lax_forward needs xi0 >= -1/2");

  const GridGeometry& geom = xi0.geom;
  detail::WindowOffsets window = detail::halfpi_window(geom);
  GridFunction out(geom);
  int d = geom.dimension();

  parallel_for(geom.size(), threads, [&](std::size_t node) {
    std::vector<int> idx = geom.multi(node);
    double best = 0.5 / t;  // truncation branch
    for (std::size_t w = 0; w < window.flat.size(); ++w) {
      bool inside = true;
      for (int k = 0; k < d; ++k) {
        int j = idx[k] + window.delta[w][k];
        if (j < 0 || j >= geom.shape[k]) {
          inside = false;
          break;
        }
      }
      if (!inside) continue;
      double v = xi0.values[static_cast<std::size_t>(static_cast<long>(node) + window.flat[w])];
      if (v == inf) continue;  // candidate value 1/(2t), already covered
      double den = 1.0 + 2.0 * t * v;
      double c2 = window.cos2[w];
      double cand;
      if (den <= 0.0)
        cand = (c2 > 0.0) ? -inf : 0.5 / t;  // xi0 = -1/2 at t = 1
      else
        cand = (1.0 - c2 / den) * 0.5 / t;
      best = std::min(best, cand);
    }
    out.values[node] = best;
  });
  return out;
}

// Backward flow xi_bar_t = R_{1-t} xi_bar_1 = -P_{1-t}(-xi_bar_1).
inline GridFunction hopf_lax_backward(const GridFunction& xibar1, double t, int threads = 1) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("hopf_lax_backward needs t in [0,1]");
  for (double v : xibar1.values)
    if (v > 0.5) throw InfeasiblePotential("hopf_lax_backward needs xi_bar_1 <= 1/2");
  if (t == 1.0) return xibar1;
  GridFunction neg = xibar1;
  for (auto& v : neg.values) v = -v;
  GridFunction flowed = hopf_lax_forward(neg, 1.0 - t, threads);
  for (auto& v : flowed.values) v = -v;
  return flowed;
}

// Max-norm defect of P_t xi0 against P_{t-s}(P_s xi0); matching infinite
// values count as zero defect.
inline double semigroup_residual(const GridFunction& xi0, double s, double t, int threads = 1) {
  if (!(0.0 <= s && s < t && t <= 1.0)) throw DomainError("semigroup_residual needs 0 <= s < t <= 1");
  GridFunction direct = hopf_lax_forward(xi0, t, threads);
  GridFunction stepped = hopf_lax_forward(hopf_lax_forward(xi0, s, threads), t - s, threads);
  double worst = 0.0;
  for (std::size_t k = 0; k < direct.values.size(); ++k) {
    double a = direct.values[k], b = stepped.values[k];
    if (std::isinf(a) || std::isinf(b)) {
      if (a != b) return inf;
      continue;
    }
    worst = std::max(worst, std::abs(a - b));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Contact sets Xi_t = {xi_t = xi_bar_t} with the t-independent subsets
// Xi^- (xi_t at its floor -1/(2(1-t))) and Xi^+ (xi_bar_t at its cap 1/(2t)).
// ---------------------------------------------------------------------------

struct ContactSet {
  std::vector<char> mask;        // xi_t == xi_bar_t within tolerance
  std::vector<char> minus_mask;  // subset where xi_0 = -1/2 (pure decay)
  std::vector<char> plus_mask;   // subset where xi_bar_1 = 1/2 (pure growth)
  double tolerance = 0.0;

  std::size_t count() const {
    std::size_t n = 0;
    for (char c : mask) n += (c != 0);
    return n;
  }
};

inline ContactSet contact_set(const GridFunction& xi_t, const GridFunction& xibar_t, double t,
                              double tolerance) {
  if (!xi_t.geom.same_as(xibar_t.geom)) throw DimensionMismatch("contact_set: grids differ");
  ContactSet out;
  out.tolerance = tolerance;
  out.mask.assign(xi_t.values.size(), 0);
  out.minus_mask.assign(xi_t.values.size(), 0);
  out.plus_mask.assign(xi_t.values.size(), 0);
  double floor_t = (t < 1.0) ? -0.5 / (1.0 - t) : -inf;
  double cap_t = (t > 0.0) ? 0.5 / t : inf;
  for (std::size_t k = 0; k < xi_t.values.size(); ++k) {
    double a = xi_t.values[k], b = xibar_t.values[k];
    double gap = a - b;  // inf - inf handled below
    if (std::isinf(a) || std::isinf(b)) gap = (a == b) ? 0.0 : inf;
    if (gap < -tolerance)
      throw OrderViolation("contact_set: xi_t < xi_bar_t beyond tolerance");
    if (std::abs(gap) <= tolerance) {
      out.mask[k] = 1;
      if (std::isfinite(floor_t) && std::abs(a - floor_t) <= tolerance) out.minus_mask[k] = 1;
      if (std::isfinite(cap_t) && std::abs(b - cap_t) <= tolerance) out.plus_mask[k] = 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transport-dilation map at a contact node:
//   T_{s->t}(x) = x + arctan(tau grad / (1 + 2 tau xi_s)),
//   q^2_{s->t}(x) = (1 + 2 tau xi_s)^2 + tau^2 |grad|^2,  tau = t - s.
// ---------------------------------------------------------------------------

struct TransportMapResult {
  Vec T;
  double q = 1.0;
  double duality_residual = 0.0;  // |(1 - 2 tau xi_t(T))(1 + 2 tau xi_s(x)) - cos^2|
};

inline TransportMapResult transport_map(const GridFunction& xi_s, double s, double t,
                                        std::size_t node, const GridFunction* xi_t = nullptr) {
  double tau = t - s;
  double v = xi_s.values[node];
  if (!std::isfinite(v)) throw VertexRegion("transport_map: potential not finite at node");
  double den = 1.0 + 2.0 * tau * v;
  if (den <= 0.0) throw VertexRegion("transport_map: 1 + 2 tau xi_s <= 0");
  Vec g = xi_s.gradient(node);
  Vec x = xi_s.geom.node(node);
  TransportMapResult out;
  out.T = add(x, arctan_vec(scale(tau / den, g)));
  out.q = std::sqrt(den * den + tau * tau * dot(g, g));
  if (xi_t != nullptr) {
    double vt = xi_t->interpolate(out.T);
    out.duality_residual =
        std::abs((1.0 - 2.0 * tau * vt) * den - cos2_halfpi(dist(x, out.T)));
  }
  return out;
}

// Z_t(u', u) = (1 - 2 t u)/(1 + 2 t u'), the radius-transfer factor along
// optimal point chains; Z_t(+inf, u) = 0.
inline double Z_factor(double u_from, double u_to, double tau) {
  if (u_from == inf) return 0.0;
  double den = 1.0 + 2.0 * tau * u_from;
  double num = 1.0 - 2.0 * tau * u_to;
  if (den < 0.0 || num < 0.0) throw DomainError("Z_factor arguments out of range");
  if (den == 0.0) return inf;
  return num / den;
}

// ---------------------------------------------------------------------------
// Potential families t -> xi_t feeding the characteristic system. A provider
// evaluates xi, its gradient and Hessian at (t, x); contact_gap reports
// |xi_t - xi_bar_t| where a backward solution is known (0 otherwise).
// ---------------------------------------------------------------------------

struct HJFlowProvider {
  virtual ~HJFlowProvider() = default;
  virtual int dimension() const = 0;
  virtual double value(double t, const Vec& x) const = 0;
  virtual Vec grad(double t, const Vec& x) const = 0;
  virtual Mat hess(double t, const Vec& x) const = 0;
  virtual double contact_gap(double /*t*/, const Vec& /*x*/) const { return 0.0; }
};

// Spatially constant potential: xi_t = a / (1 + 2 (t - s) a).
struct ConstantFlow final : HJFlowProvider {
  int dim;
  double a, s;
  ConstantFlow(int dimension, double value_at_s, double time_s)
      : dim(dimension), a(value_at_s), s(time_s) {}
  int dimension() const override { return dim; }
  double value(double t, const Vec&) const override { return a / (1.0 + 2.0 * (t - s) * a); }
  Vec grad(double, const Vec&) const override { return Vec(dim, 0.0); }
  Mat hess(double, const Vec&) const override { return Mat(dim); }
};

// Exact 1-D two-Dirac pair: forward and backward solutions in closed form.
struct TwoDiracFlow final : HJFlowProvider {
  double z0, z1, r0, r1, s0, s1;
  TwoDiracFlow(double pos0, double pos1, double rad0 = 1.0, double rad1 = 1.0)
      : z0(pos0), z1(pos1), r0(rad0), r1(rad1) {
    double c = cos_trunc(half_pi, z1 - z0);
    s0 = r1 / r0 * c;
    s1 = r0 / r1 * c;
  }
  int dimension() const override { return 1; }

  double forward(double t, double x) const {
    double A = 1.0 - t + t * s0;
    return (A - cos2_halfpi(x - z0)) / (2.0 * t * A);
  }
  double backward(double t, double x) const {
    double B = t + (1.0 - t) * s1;
    return (cos2_halfpi(x - z1) - t - (1.0 - t) * s1) / (2.0 * (1.0 - t) * B);
  }

  double value(double t, const Vec& x) const override { return forward(t, x[0]); }
  Vec grad(double t, const Vec& x) const override {
    double A = 1.0 - t + t * s0;
    double r = x[0] - z0;
    double g = (std::abs(r) < half_pi) ? std::sin(2.0 * r) / (2.0 * t * A) : 0.0;
    return Vec{g};
  }
  Mat hess(double t, const Vec& x) const override {
    double A = 1.0 - t + t * s0;
    double r = x[0] - z0;
    Mat H(1);
    H(0, 0) = (std::abs(r) < half_pi) ? std::cos(2.0 * r) / (t * A) : 0.0;
    return H;
  }
  double contact_gap(double t, const Vec& x) const override {
    return forward(t, x[0]) - backward(t, x[0]);
  }
};

// Flow of a smooth analytic potential xi_s: values by minimizing the
// Hopf--Lax objective with damped Newton (the backward branch for t < s),
// spatial gradient by the envelope formula, Hessian by differencing the
// envelope gradient. Suitable when the minimizer stays in the smooth region.
struct SmoothHopfLaxFlow final : HJFlowProvider {
  int dim;
  double s;
  std::function<double(const Vec&)> xi;
  std::function<Vec(const Vec&)> xi_grad;
  std::function<Mat(const Vec&)> xi_hess;
  double hess_step = 1e-5;

  SmoothHopfLaxFlow(int dimension, double time_s, std::function<double(const Vec&)> value_fn,
                    std::function<Vec(const Vec&)> grad_fn, std::function<Mat(const Vec&)> hess_fn)
      : dim(dimension), s(time_s), xi(std::move(value_fn)), xi_grad(std::move(grad_fn)),
        xi_hess(std::move(hess_fn)) {}

  int dimension() const override { return dim; }

  // minimize m(y) = (1/2tau)(1 - cos^2(|x-y|)/(1 + 2 tau sgn xi(y))) near x
  struct Inner {
    Vec y;
    double value;
    double r;  // |x - y|
  };

  Inner minimize(double tau, double sgn, const Vec& x) const {
    auto D = [&](const Vec& y) { return 1.0 + 2.0 * tau * sgn * xi(y); };
    auto m = [&](const Vec& y) {
      double r = dist(x, y);
      if (r >= half_pi) return 0.5 / tau;
      double c = std::cos(r);
      return (1.0 - c * c / D(y)) * 0.5 / tau;
    };
    Vec y = x;
    for (int iter = 0; iter < 60; ++iter) {
      Vec w = sub(y, x);
      double r = norm(w);
      double sin2r_over_r = (r < 1e-8) ? 2.0 : std::sin(2.0 * r) / r;
      double C = std::cos(r) * std::cos(r);
      Vec gC = scale(-sin2r_over_r, w);
      Mat HC(dim);
      {
        double cpp = -2.0 * std::cos(2.0 * r);
        double cp_over_r = -sin2r_over_r;
        if (r < 1e-8) {
          HC = Mat(dim, -2.0);
        } else {
          Mat P = Mat::outer(scale(1.0 / r, w), scale(1.0 / r, w));
          HC = P.scaled(cpp - cp_over_r).plus(Mat(dim, cp_over_r));
        }
      }
      double Dv = D(y);
      Vec gD = scale(2.0 * tau * sgn, xi_grad(y));
      Mat HD = xi_hess(y).scaled(2.0 * tau * sgn);
      double c1 = -0.5 / tau;
      Vec gm = scale(c1, sub(scale(1.0 / Dv, gC), scale(C / (Dv * Dv), gD)));
      Mat Hm = HC.scaled(1.0 / Dv)
                   .plus(Mat::outer(gC, gD).plus(Mat::outer(gD, gC)).scaled(-1.0 / (Dv * Dv)))
                   .plus(HD.scaled(-C / (Dv * Dv)))
                   .plus(Mat::outer(gD, gD).scaled(2.0 * C / (Dv * Dv * Dv)))
                   .scaled(c1);
      double gn = norm(gm);
      if (gn < 1e-15) break;
      // Newton step with gradient fallback; convergence measured by the
      // step size (value-based acceptance stalls below rounding near the
      // minimum of a flat objective)
      Vec step;
      double det = Hm.det();
      if (dim == 1 && Hm(0, 0) > 0.0)
        step = Vec{-gm[0] / Hm(0, 0)};
      else if (dim == 2 && det > 0.0 && Hm(0, 0) > 0.0) {
        step = Vec{-(Hm(1, 1) * gm[0] - Hm(0, 1) * gm[1]) / det,
                   -(-Hm(1, 0) * gm[0] + Hm(0, 0) * gm[1]) / det};
      } else {
        step = scale(-0.1, gm);
      }
      double sn = norm(step);
      if (sn > 0.25) step = scale(0.25 / sn, step);  // keep the smooth basin
      Vec cand = add(y, step);
      if (dist(cand, x) >= 0.98 * half_pi) break;
      y = cand;
      if (norm(step) < 1e-13 * (1.0 + norm(y))) break;
    }
    return {y, m(y), dist(x, y)};
  }

  double value(double t, const Vec& x) const override {
    if (t == s) return xi(x);
    if (t > s) return minimize(t - s, +1.0, x).value;
    return -minimize(s - t, -1.0, x).value;
  }

  Vec grad(double t, const Vec& x) const override {
    if (t == s) return xi_grad(x);
    double tau = std::abs(t - s), sgn = (t > s) ? 1.0 : -1.0;
    Inner in = minimize(tau, sgn, x);
    double r = in.r;
    double sin2r_over_r = (r < 1e-8) ? 2.0 : std::sin(2.0 * r) / r;
    double Dv = 1.0 + 2.0 * tau * sgn * xi(in.y);
    // envelope: d/dx of the inner objective at the frozen minimizer
    Vec g = scale(sgn * sin2r_over_r / (2.0 * tau * Dv), sub(x, in.y));
    return g;
  }

  Mat hess(double t, const Vec& x) const override {
    if (t == s) return xi_hess(x);
    Mat H(dim);
    for (int k = 0; k < dim; ++k) {
      Vec xp = x, xm = x;
      xp[k] += hess_step;
      xm[k] -= hess_step;
      Vec gp = grad(t, xp), gm_ = grad(t, xm);
      for (int r = 0; r < dim; ++r) H(r, k) = (gp[r] - gm_[r]) / (2.0 * hess_step);
    }
    // symmetrize
    for (int r = 0; r < dim; ++r)
      for (int c = r + 1; c < dim; ++c) {
        double v = 0.5 * (H(r, c) + H(c, r));
        H(r, c) = H(c, r) = v;
      }
    return H;
  }
};

// Flow grown from a grid potential: values by the exhaustive pointwise
// minimization over grid nodes, derivatives by central differences with the
// grid spacing. Accuracy O(h); used for grid-resolution refinement studies.
struct GridHopfLaxFlow final : HJFlowProvider {
  GridFunction xi_s;
  double s;

  GridHopfLaxFlow(GridFunction potential_at_s, double time_s)
      : xi_s(std::move(potential_at_s)), s(time_s) {}

  int dimension() const override { return xi_s.geom.dimension(); }

  double value(double t, const Vec& x) const override {
    if (t == s) return xi_s.interpolate(x);
    double tau = std::abs(t - s), sgn = (t > s) ? 1.0 : -1.0;
    double best = 0.5 / tau;
    for (std::size_t n = 0; n < xi_s.values.size(); ++n) {
      double r = dist(x, xi_s.geom.node(n));
      if (r >= half_pi) continue;
      double v = sgn * xi_s.values[n];
      if (v == inf) continue;
      double den = 1.0 + 2.0 * tau * v;
      if (den <= 0.0) {
        if (cos2_halfpi(r) > 0.0) return (sgn > 0) ? -inf : inf;
        continue;
      }
      double c = std::cos(r);
      best = std::min(best, (1.0 - c * c / den) * 0.5 / tau);
    }
    return sgn * best;
  }

  Vec grad(double t, const Vec& x) const override {
    int d = dimension();
    Vec g(d);
    for (int k = 0; k < d; ++k) {
      double h = xi_s.geom.spacing[k];
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      g[k] = (value(t, xp) - value(t, xm)) / (2.0 * h);
    }
    return g;
  }

  Mat hess(double t, const Vec& x) const override {
    int d = dimension();
    Mat H(d);
    for (int k = 0; k < d; ++k) {
      double hk = xi_s.geom.spacing[k];
      for (int l = k; l < d; ++l) {
        double hl = xi_s.geom.spacing[l];
        if (k == l) {
          Vec xp = x, xm = x;
          xp[k] += hk;
          xm[k] -= hk;
          H(k, k) = (value(t, xp) - 2.0 * value(t, x) + value(t, xm)) / (hk * hk);
        } else {
          Vec a = x, b = x, c = x, e = x;
          a[k] += hk; a[l] += hl;
          b[k] += hk; b[l] -= hl;
          c[k] -= hk; c[l] += hl;
          e[k] -= hk; e[l] -= hl;
          double v = (value(t, a) - value(t, b) - value(t, c) + value(t, e)) / (4.0 * hk * hl);
          H(k, l) = H(l, k) = v;
        }
      }
    }
    return H;
  }
};

// ---------------------------------------------------------------------------
// Characteristic system on the contact set:
//   dT/dt = grad xi_t(T),  dq/dt = 2 xi_t(T) q,
//   dB/dt = D^2 xi_t(T) B, d(det)/dt = lap xi_t(T) det.
// Classical RK4 with fixed step; the stored trajectory also records the
// provider data needed for the second-order identity checks.
// ---------------------------------------------------------------------------

struct CharacteristicState {
  Vec T;
  double q = 1.0;
  Mat B;
  double delta = 1.0;
};

struct TrajectorySample {
  double t = 0.0;
  CharacteristicState state;
  double xi = 0.0;
  Vec grad;
  Mat hess;
};

struct Trajectory {
  int d = 0;
  double dt = 0.0;
  std::vector<TrajectorySample> samples;  // at the requested times, ascending
};

struct CharacteristicResiduals {
  double T = 0.0, q = 0.0, B = 0.0, delta = 0.0;
};

namespace detail {

struct FlowState {
  Vec T;
  double q;
  Mat B;
  double delta;
};

inline FlowState flow_axpy(const FlowState& a, double c, const FlowState& b) {
  FlowState out = a;
  for (std::size_t k = 0; k < out.T.size(); ++k) out.T[k] += c * b.T[k];
  out.q += c * b.q;
  for (std::size_t k = 0; k < out.B.a.size(); ++k) out.B.a[k] += c * b.B.a[k];
  out.delta += c * b.delta;
  return out;
}

inline FlowState flow_rhs(const HJFlowProvider& flow, double t, const FlowState& y) {
  double xi = flow.value(t, y.T);
  Vec g = flow.grad(t, y.T);
  Mat H = flow.hess(t, y.T);
  FlowState f;
  f.T = g;
  f.q = 2.0 * xi * y.q;
  f.B = H.mul(y.B);
  f.delta = H.trace() * y.delta;
  return f;
}

inline void rk4_step(const HJFlowProvider& flow, double t, double h, FlowState& y) {
  FlowState k1 = flow_rhs(flow, t, y);
  FlowState k2 = flow_rhs(flow, t + 0.5 * h, flow_axpy(y, 0.5 * h, k1));
  FlowState k3 = flow_rhs(flow, t + 0.5 * h, flow_axpy(y, 0.5 * h, k2));
  FlowState k4 = flow_rhs(flow, t + h, flow_axpy(y, h, k3));
  y = flow_axpy(y, h / 6.0, k1);
  y = flow_axpy(y, h / 3.0, k2);
  y = flow_axpy(y, h / 3.0, k3);
  y = flow_axpy(y, h / 6.0, k4);
}

}  // namespace detail

inline Trajectory characteristic_flow(const HJFlowProvider& flow, double s, const Vec& x,
                                      const std::vector<double>& times, double dt = 1e-3,
                                      double contact_tol = inf) {
  int d = flow.dimension();
  Trajectory traj;
  traj.d = d;
  traj.dt = dt;

  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());

  auto record = [&](double t, const detail::FlowState& st) {
    TrajectorySample smp;
    smp.t = t;
    smp.state = {st.T, st.q, st.B, st.delta};
    smp.xi = flow.value(t, st.T);
    smp.grad = flow.grad(t, st.T);
    smp.hess = flow.hess(t, st.T);
    traj.samples.push_back(std::move(smp));
  };

  auto integrate_to = [&](detail::FlowState& st, double& t, double target) {
    double span = target - t;
    int steps = std::max(1, static_cast<int>(std::ceil(std::abs(span) / dt)));
    double h = span / steps;
    for (int k = 0; k < steps; ++k) {
      detail::rk4_step(flow, t, h, st);
      t += h;
      if (flow.contact_gap(t, st.T) > contact_tol)
        throw LeftContactSet("characteristic trajectory left the contact set");
    }
    t = target;
  };

  detail::FlowState init{x, 1.0, Mat::identity(d), 1.0};

  // backward sweep from s down, then forward sweep from s up
  std::vector<std::pair<double, detail::FlowState>> recorded;
  {
    detail::FlowState st = init;
    double t = s;
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
      if (*it > s) continue;
      integrate_to(st, t, *it);
      recorded.push_back({*it, st});
    }
  }
  {
    detail::FlowState st = init;
    double t = s;
    for (double target : sorted) {
      if (target <= s) continue;
      integrate_to(st, t, target);
      recorded.push_back({target, st});
    }
  }
  std::sort(recorded.begin(), recorded.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [t, st] : recorded) record(t, st);
  return traj;
}

// Residuals of the second-order identities, by centered second differences of
// the stored trajectory against the closed-form right-hand sides. Requires a
// uniform time grid.
inline CharacteristicResiduals characteristic_residuals(const Trajectory& traj) {
  CharacteristicResiduals res;
  std::size_t n = traj.samples.size();
  if (n < 3) return res;
  double H = traj.samples[1].t - traj.samples[0].t;
  for (std::size_t k = 1; k + 1 < n; ++k)
    if (std::abs((traj.samples[k + 1].t - traj.samples[k].t) - H) > 1e-12)
      throw DomainError("characteristic_residuals needs a uniform time grid");

  // fourth-order five-point second differences in the interior
  auto dd = [&](auto&& get, std::size_t k) {
    if (k >= 2 && k + 2 < n)
      return (-get(k - 2) + 16.0 * get(k - 1) - 30.0 * get(k) + 16.0 * get(k + 1) - get(k + 2)) /
             (12.0 * H * H);
    return (get(k + 1) - 2.0 * get(k) + get(k - 1)) / (H * H);
  };
  std::size_t first = (n >= 5) ? 2 : 1;
  std::size_t last = (n >= 5) ? n - 2 : n - 1;

  for (std::size_t k = first; k < last; ++k) {
    const auto& b = traj.samples[k];
    double xi = b.xi;
    const Vec& g = b.grad;
    const Mat& Hm = b.hess;
    double g2 = dot(g, g);

    for (int i = 0; i < traj.d; ++i) {
      double num = dd([&](std::size_t m) { return traj.samples[m].state.T[i]; }, k);
      res.T = std::max(res.T, std::abs(num - (-4.0 * xi * g[i])));
    }
    {
      double num = dd([&](std::size_t m) { return traj.samples[m].state.q; }, k);
      res.q = std::max(res.q, std::abs(num - g2 * b.state.q));
    }
    {
      Mat rhs = Mat::outer(g, g).plus(Hm.scaled(xi)).scaled(-4.0).mul(b.state.B);
      for (std::size_t e = 0; e < rhs.a.size(); ++e) {
        double num = dd([&](std::size_t m) { return traj.samples[m].state.B.a[e]; }, k);
        res.B = std::max(res.B, std::abs(num - rhs.a[e]));
      }
    }
    {
      double lap = Hm.trace();
      double rhs = (lap * lap - Hm.frob2() - 4.0 * g2 - 4.0 * xi * lap) * b.state.delta;
      double num = dd([&](std::size_t m) { return traj.samples[m].state.delta; }, k);
      res.delta = std::max(res.delta, std::abs(num - rhs));
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Curvature estimates along a trajectory: gamma = q and rho = q det^(1/d)
// must satisfy  dd(gamma)/gamma >= 0  and  dd(rho)/rho <= (1 - 4/d) dd(gamma)/gamma
// (equality for d = 1). Closed forms: dd(gamma)/gamma = |grad xi|^2 and
// dd(rho)/rho = ((lap xi)^2 - d |D^2 xi|^2)/d^2 + (1 - 4/d) |grad xi|^2.
// ---------------------------------------------------------------------------

struct CurvatureSample {
  double t = 0.0;
  double gamma_dd_over_gamma = 0.0;
  double rho_dd_over_rho = 0.0;
  double gamma_closed_form = 0.0;
  double rho_closed_form = 0.0;
};

struct CurvatureDiagnostics {
  std::vector<CurvatureSample> samples;
  int gamma_violations = 0;  // gamma_dd/gamma < -tol_gamma
  int rho_violations = 0;    // rho_dd/rho > (1-4/d) gamma_dd/gamma + tol_rho
  double max_equality_defect = 0.0;  // d = 1 only
};

inline CurvatureDiagnostics curvature_diagnostics(const Trajectory& traj, double tol_gamma = 1e-10,
                                                  double tol_rho = 1e-8) {
  CurvatureDiagnostics diag;
  std::size_t n = traj.samples.size();
  if (n < 3) return diag;
  double H = traj.samples[1].t - traj.samples[0].t;
  int d = traj.d;

  std::vector<double> gamma(n), rho(n);
  for (std::size_t k = 0; k < n; ++k) {
    gamma[k] = traj.samples[k].state.q;
    rho[k] = gamma[k] * std::pow(traj.samples[k].state.delta, 1.0 / d);
  }

  // fourth-order five-point stencil; the two edge samples per side are only
  // differenced when the trajectory is too short for it
  auto second_diff = [&](const std::vector<double>& y, std::size_t k) {
    if (k >= 2 && k + 2 < n)
      return (-y[k - 2] + 16.0 * y[k - 1] - 30.0 * y[k] + 16.0 * y[k + 1] - y[k + 2]) /
             (12.0 * H * H);
    return (y[k + 1] - 2.0 * y[k] + y[k - 1]) / (H * H);
  };
  std::size_t first = (n >= 5) ? 2 : 1;
  std::size_t last = (n >= 5) ? n - 2 : n - 1;

  for (std::size_t k = first; k < last; ++k) {
    const auto& smp = traj.samples[k];
    CurvatureSample cs;
    cs.t = smp.t;
    cs.gamma_dd_over_gamma = second_diff(gamma, k) / gamma[k];
    cs.rho_dd_over_rho = second_diff(rho, k) / rho[k];
    double g2 = dot(smp.grad, smp.grad);
    double lap = smp.hess.trace();
    cs.gamma_closed_form = g2;
    cs.rho_closed_form = (lap * lap - d * smp.hess.frob2()) / double(d * d) + (1.0 - 4.0 / d) * g2;
    if (cs.gamma_dd_over_gamma < -tol_gamma) ++diag.gamma_violations;
    double bound = (1.0 - 4.0 / d) * cs.gamma_dd_over_gamma + tol_rho;
    if (cs.rho_dd_over_rho > bound) ++diag.rho_violations;
    if (d == 1)
      diag.max_equality_defect =
          std::max(diag.max_equality_defect,
                   std::abs(cs.rho_dd_over_rho - (1.0 - 4.0 / d) * cs.gamma_dd_over_gamma));
    diag.samples.push_back(cs);
  }
  return diag;
}

}  // namespace hk
