#pragma once

#include <map>

#include "hk/common.hpp"

namespace hk {

// ---------------------------------------------------------------------------
// Finite non-negative measures as atom lists.
// ---------------------------------------------------------------------------

struct Atom {
  Vec x;
  double mass = 0.0;
};

struct DiscreteMeasure {
  int dimension = 0;
  std::vector<Atom> atoms;

  DiscreteMeasure() = default;
  explicit DiscreteMeasure(int dim) : dimension(dim) {
    if (dim <= 0) throw NonpositiveParameter("dimension must be positive");
  }
  DiscreteMeasure(int dim, std::vector<Atom> raw) : DiscreteMeasure(dim) {
    atoms.reserve(raw.size());
    for (auto& a : raw) {
      if (static_cast<int>(a.x.size()) != dim)
        throw DimensionMismatch("atom position has wrong dimension");
      if (a.mass < 0.0) throw Error("atom mass must be nonnegative");
      if (a.mass == 0.0) continue;  // zero-mass atoms are dropped on construction
      atoms.push_back(std::move(a));
    }
  }

  bool empty() const { return atoms.empty(); }

  double total_mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.mass;
    return m;
  }

  DiscreteMeasure& add(Vec x, double mass) {
    if (static_cast<int>(x.size()) != dimension)
      throw DimensionMismatch("atom position has wrong dimension");
    if (mass < 0.0) throw Error("atom mass must be nonnegative");
    if (mass > 0.0) atoms.push_back({std::move(x), mass});
    return *this;
  }

  // Merge atoms with bit-identical coordinates. No quantization by default:
  // merging never relocates mass.
  DiscreteMeasure merged() const {
    std::map<Vec, double> acc;
    for (const auto& a : atoms) acc[a.x] += a.mass;
    DiscreteMeasure out(dimension);
    for (auto& [x, m] : acc)
      if (m > 0.0) out.atoms.push_back({x, m});
    return out;
  }
};

inline DiscreteMeasure dirac(Vec x, double mass = 1.0) {
  int d = static_cast<int>(x.size());
  return DiscreteMeasure(d, {{std::move(x), mass}});
}

// Total-variation distance of two atom lists after exact-coordinate merging.
inline double tv_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dimension != b.dimension) throw DimensionMismatch("tv_distance: dimensions differ");
  std::map<Vec, double> acc;
  for (const auto& atom : a.atoms) acc[atom.x] += atom.mass;
  for (const auto& atom : b.atoms) acc[atom.x] -= atom.mass;
  double tv = 0.0;
  for (const auto& [x, m] : acc) tv += std::abs(m);
  return tv;
}

// Like tv_distance but matches atoms within a spatial tolerance, greedily.
// Intended for comparing two discretizations of the same measure.
inline double fuzzy_tv_distance(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                double position_tol) {
  if (a.dimension != b.dimension) throw DimensionMismatch("fuzzy_tv_distance: dimensions differ");
  DiscreteMeasure am = a.merged(), bm = b.merged();
  std::vector<double> bm_left(bm.atoms.size());
  for (std::size_t j = 0; j < bm.atoms.size(); ++j) bm_left[j] = bm.atoms[j].mass;
  double tv = 0.0;
  for (const auto& atom : am.atoms) {
    double rest = atom.mass;
    for (std::size_t j = 0; j < bm.atoms.size() && rest > 0.0; ++j) {
      if (bm_left[j] <= 0.0) continue;
      if (dist(atom.x, bm.atoms[j].x) <= position_tol) {
        double take = std::min(rest, bm_left[j]);
        rest -= take;
        bm_left[j] -= take;
      }
    }
    tv += rest;
  }
  for (double m : bm_left) tv += std::max(m, 0.0);
  return tv;
}

// ---------------------------------------------------------------------------
// Support decomposition at the pi/2 threshold. An atom of mu_i is "near" iff
// its distance to the support of the other measure is strictly below pi/2
// (the pi/2-neighborhood is open, so distance exactly pi/2 counts as far).
// ---------------------------------------------------------------------------

struct SupportDecomposition {
  std::vector<std::size_t> near0, far0, near1, far1;
  double near_mass0 = 0.0, far_mass0 = 0.0;
  double near_mass1 = 0.0, far_mass1 = 0.0;
};

inline double dist_to_support(const Vec& x, const DiscreteMeasure& mu) {
  double best = inf;
  for (const auto& a : mu.atoms) best = std::min(best, dist(x, a.x));
  return best;
}

inline SupportDecomposition decompose_supports(const DiscreteMeasure& mu0,
                                               const DiscreteMeasure& mu1) {
  if (mu0.dimension != mu1.dimension)
    throw DimensionMismatch("decompose_supports: dimensions differ");
  SupportDecomposition out;
  for (std::size_t i = 0; i < mu0.atoms.size(); ++i) {
    if (dist_to_support(mu0.atoms[i].x, mu1) < half_pi) {
      out.near0.push_back(i);
      out.near_mass0 += mu0.atoms[i].mass;
    } else {
      out.far0.push_back(i);
      out.far_mass0 += mu0.atoms[i].mass;
    }
  }
  for (std::size_t j = 0; j < mu1.atoms.size(); ++j) {
    if (dist_to_support(mu1.atoms[j].x, mu0) < half_pi) {
      out.near1.push_back(j);
      out.near_mass1 += mu1.atoms[j].mass;
    } else {
      out.far1.push_back(j);
      out.far_mass1 += mu1.atoms[j].mass;
    }
  }
  return out;
}

enum class Reduction { not_reduced, reduced, strongly_reduced };

// For finite atom sets the support equals the atom set, so a reduced pair is
// automatically strongly reduced (the minimum over finitely many distances is
// attained below pi/2).
inline Reduction is_reduced(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  SupportDecomposition dec = decompose_supports(mu0, mu1);
  if (!dec.far0.empty() || !dec.far1.empty()) return Reduction::not_reduced;
  return Reduction::strongly_reduced;
}

// ---------------------------------------------------------------------------
// Parameter rescaling: HK^2_{alpha,beta}(mu0, mu1) equals
// (4/beta) * HK^2_{1,4} applied to the measures with positions divided by
// lambda = sqrt(4 alpha / beta).
// ---------------------------------------------------------------------------

struct RescaledMeasure {
  DiscreteMeasure measure;
  double mass_factor = 1.0;   // multiplies squared distances computed in HK_{1,4}
  double space_factor = 1.0;  // positions were divided by this lambda
};

inline RescaledMeasure rescale_to_canonical(double alpha, double beta,
                                            const DiscreteMeasure& mu) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw NonpositiveParameter("rescale_to_canonical: alpha, beta must be positive");
  double lambda = std::sqrt(4.0 * alpha / beta);
  DiscreteMeasure out(mu.dimension);
  out.atoms.reserve(mu.atoms.size());
  for (const auto& a : mu.atoms) out.atoms.push_back({scale(1.0 / lambda, a.x), a.mass});
  return {std::move(out), 4.0 / beta, lambda};
}

inline DiscreteMeasure rescale_from_canonical(const RescaledMeasure& rescaled) {
  DiscreteMeasure out(rescaled.measure.dimension);
  out.atoms.reserve(rescaled.measure.atoms.size());
  for (const auto& a : rescaled.measure.atoms)
    out.atoms.push_back({scale(rescaled.space_factor, a.x), a.mass});
  return out;
}

// ---------------------------------------------------------------------------
// Densities on regular lattices.
// ---------------------------------------------------------------------------

struct GridDensity;
inline DiscreteMeasure grid_to_measure(const GridDensity& g);

struct GridGeometry {
  std::vector<std::pair<double, double>> box;  // [lo, hi] per axis
  std::vector<double> spacing;                 // positive, per axis
  std::vector<int> shape;                      // nodes per axis, derived

  GridGeometry() = default;
  GridGeometry(std::vector<std::pair<double, double>> b, std::vector<double> h)
      : box(std::move(b)), spacing(std::move(h)) {
    if (box.size() != spacing.size()) throw DimensionMismatch("box/spacing rank mismatch");
    if (box.empty()) throw EmptyGrid("grid must have at least one axis");
    shape.resize(box.size());
    for (std::size_t k = 0; k < box.size(); ++k) {
      if (!(spacing[k] > 0.0)) throw NonpositiveParameter("grid spacing must be positive");
      double span = box[k].second - box[k].first;
      if (span < 0.0) throw Error("grid box is inverted");
      long n = std::lround(span / spacing[k]);
      if (std::abs(box[k].first + double(n) * spacing[k] - box[k].second) >
          1e-9 * std::max(1.0, std::abs(span)))
        throw Error("grid box is not an integer number of cells");
      shape[k] = static_cast<int>(n) + 1;
    }
  }

  int dimension() const { return static_cast<int>(box.size()); }

  std::size_t size() const {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    return n;
  }

  // flat index <-> multi index (last axis fastest)
  std::size_t flat(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (std::size_t k = 0; k < idx.size(); ++k)
      f = f * static_cast<std::size_t>(shape[k]) + static_cast<std::size_t>(idx[k]);
    return f;
  }

  std::vector<int> multi(std::size_t flat_index) const {
    std::vector<int> idx(shape.size());
    for (std::size_t k = shape.size(); k-- > 0;) {
      idx[k] = static_cast<int>(flat_index % static_cast<std::size_t>(shape[k]));
      flat_index /= static_cast<std::size_t>(shape[k]);
    }
    return idx;
  }

  Vec node(std::size_t flat_index) const {
    std::vector<int> idx = multi(flat_index);
    Vec x(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) x[k] = box[k].first + idx[k] * spacing[k];
    return x;
  }

  double cell_volume() const {
    double v = 1.0;
    for (double h : spacing) v *= h;
    return v;
  }

  // Product trapezoid weight of a node: cell volume halved once per boundary
  // axis. Exact for densities that are piecewise linear per cell.
  double quadrature_weight(std::size_t flat_index) const {
    std::vector<int> idx = multi(flat_index);
    double w = cell_volume();
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (shape[k] > 1 && (idx[k] == 0 || idx[k] == shape[k] - 1)) w *= 0.5;
    return w;
  }

  bool same_as(const GridGeometry& other, double tol = 1e-12) const {
    if (shape != other.shape) return false;
    for (std::size_t k = 0; k < box.size(); ++k) {
      if (std::abs(box[k].first - other.box[k].first) > tol) return false;
      if (std::abs(spacing[k] - other.spacing[k]) > tol) return false;
    }
    return true;
  }
};

struct GridDensity {
  GridGeometry geom;
  std::vector<double> values;  // nonnegative, mass-density units

  GridDensity() = default;
  GridDensity(GridGeometry g, std::vector<double> v) : geom(std::move(g)), values(std::move(v)) {
    if (values.size() != geom.size()) throw DimensionMismatch("grid value count mismatch");
    for (double x : values)
      if (!(x >= 0.0)) throw Error("grid density values must be nonnegative");
  }

  double total_mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] > 0.0) m += values[i] * geom.quadrature_weight(i);
    return m;
  }

  double max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
  }
};

// One atom per node with trapezoid-rule mass; zero-value nodes dropped.
inline DiscreteMeasure grid_to_measure(const GridDensity& g) {
  DiscreteMeasure out(g.geom.dimension());
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    if (g.values[i] <= 0.0) continue;
    out.atoms.push_back({g.geom.node(i), g.values[i] * g.geom.quadrature_weight(i)});
  }
  return out;
}

}  // namespace hk
