#pragma once

#include "hk/common.hpp"
#include "hk/measure.hpp"

namespace hk {

// ---------------------------------------------------------------------------
// Scalar fields on a regular lattice. Values are extended reals: +inf marks
// "no potential here" (e.g. point-supported xi_0 off its atom). Finite-
// difference calculus is only meaningful where neighbors are finite.
// ---------------------------------------------------------------------------

struct GridFunction {
  GridGeometry geom;
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(GridGeometry g, double fill = 0.0)
      : geom(std::move(g)), values(geom.size(), fill) {}
  GridFunction(GridGeometry g, std::vector<double> v)
      : geom(std::move(g)), values(std::move(v)) {
    if (values.size() != geom.size()) throw DimensionMismatch("grid value count mismatch");
  }

  template <class F>
  static GridFunction from(GridGeometry g, F&& f) {
    GridFunction out(std::move(g));
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = f(out.geom.node(i));
    return out;
  }

  double min_value() const {
    double m = inf;
    for (double v : values) m = std::min(m, v);
    return m;
  }
  double max_finite() const {
    double m = -inf;
    for (double v : values)
      if (std::isfinite(v)) m = std::max(m, v);
    return m;
  }

  // second-order central differences inside, one-sided at the boundary
  Vec gradient(std::size_t flat) const {
    std::vector<int> idx = geom.multi(flat);
    Vec g(idx.size(), 0.0);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double h = geom.spacing[k];
      int n = geom.shape[k];
      if (n < 2) continue;
      auto at = [&](int delta) {
        std::vector<int> id = idx;
        id[k] += delta;
        return values[geom.flat(id)];
      };
      if (idx[k] == 0)
        g[k] = (n >= 3) ? (-1.5 * at(0) + 2.0 * at(1) - 0.5 * at(2)) / h : (at(1) - at(0)) / h;
      else if (idx[k] == n - 1)
        g[k] = (n >= 3) ? (1.5 * at(0) - 2.0 * at(-1) + 0.5 * at(-2)) / h : (at(0) - at(-1)) / h;
      else
        g[k] = (at(1) - at(-1)) / (2.0 * h);
    }
    return g;
  }

  // dense symmetric Hessian by finite differences; boundary nodes use the
  // stencil shifted one node into the interior
  std::vector<double> hessian(std::size_t flat) const {
    std::vector<int> idx = geom.multi(flat);
    int d = geom.dimension();
    // shift so that idx +- 1 stays inside along every axis
    for (int k = 0; k < d; ++k) idx[k] = std::clamp(idx[k], 1, std::max(geom.shape[k] - 2, 1));
    std::vector<double> H(static_cast<std::size_t>(d) * d, 0.0);
    auto at = [&](int k, int dk, int l, int dl) {
      std::vector<int> id = idx;
      id[k] = std::clamp(id[k] + dk, 0, geom.shape[k] - 1);
      id[l] = std::clamp(id[l] + dl, 0, geom.shape[l] - 1);
      return values[geom.flat(id)];
    };
    for (int k = 0; k < d; ++k) {
      double hk2 = geom.spacing[k] * geom.spacing[k];
      H[k * d + k] = (at(k, 1, k, 0) - 2.0 * at(k, 0, k, 0) + at(k, -1, k, 0)) / hk2;
      for (int l = k + 1; l < d; ++l) {
        double v = (at(k, 1, l, 1) - at(k, 1, l, -1) - at(k, -1, l, 1) + at(k, -1, l, -1)) /
                   (4.0 * geom.spacing[k] * geom.spacing[l]);
        H[k * d + l] = H[l * d + k] = v;
      }
    }
    return H;
  }

  // multilinear interpolation; clamps to the box
  double interpolate(const Vec& x) const {
    int d = geom.dimension();
    std::vector<int> base(d);
    std::vector<double> frac(d);
    for (int k = 0; k < d; ++k) {
      double u = (x[k] - geom.box[k].first) / geom.spacing[k];
      u = std::clamp(u, 0.0, double(geom.shape[k] - 1));
      int b = std::min(static_cast<int>(u), geom.shape[k] - 2);
      b = std::max(b, 0);
      base[k] = b;
      frac[k] = (geom.shape[k] == 1) ? 0.0 : u - b;
    }
    double acc = 0.0;
    int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
      double w = 1.0;
      std::vector<int> idx(d);
      for (int k = 0; k < d; ++k) {
        int bit = (c >> k) & 1;
        idx[k] = std::min(base[k] + bit, geom.shape[k] - 1);
        w *= bit ? frac[k] : (1.0 - frac[k]);
      }
      if (w == 0.0) continue;
      acc += w * values[geom.flat(idx)];
    }
    return acc;
  }
};

inline GridFunction grid_function_of_density(const GridDensity& g) {
  return GridFunction(g.geom, g.values);
}

// Evaluator bundling a grid potential with interpolation-based calculus at
// arbitrary points; finite-difference steps default to the grid spacing.
struct GridPotentialEvaluator {
  const GridFunction* f;

  double value(const Vec& x) const { return f->interpolate(x); }

  Vec grad(const Vec& x) const {
    int d = f->geom.dimension();
    Vec g(d);
    for (int k = 0; k < d; ++k) {
      double h = f->geom.spacing[k];
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      g[k] = (f->interpolate(xp) - f->interpolate(xm)) / (2.0 * h);
    }
    return g;
  }
};

}  // namespace hk
