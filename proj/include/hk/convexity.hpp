#pragma once

#include <memory>
#include <optional>
#include <sstream>

#include "hk/common.hpp"
#include "hk/geodesic.hpp"
#include "hk/let.hpp"
#include "hk/measure.hpp"

namespace hk {

// ---------------------------------------------------------------------------
// Convex integrands E with E(0) = 0, their derivative calculus
//   eps_0 = E, eps_1(c) = c E'(c), eps_2(c) = c^2 E''(c),
// and the recession constant E'_inf = lim E(c)/c pricing singular mass.
// ---------------------------------------------------------------------------

struct DensityFunction {
  std::string name;
  std::function<double(double)> value;          // extended real, +inf beyond domain
  std::function<double(double)> d1, d2;         // analytic when available
  double recession = inf;                       // E'_inf
  double domain_upper = inf;                    // c_E
  bool smooth = true;                           // matrix-based certification applies
  bool sampled_only = false;                    // convexity only spot-checked
};

inline DensityFunction power_density(double m) {
  DensityFunction E;
  std::ostringstream n;
  n << "power m=" << m;
  E.name = n.str();
  E.value = [m](double c) { return std::pow(c, m); };
  E.d1 = [m](double c) { return m * std::pow(c, m - 1.0); };
  E.d2 = [m](double c) { return m * (m - 1.0) * std::pow(c, m - 2.0); };
  E.recession = (m > 1.0) ? inf : (m == 1.0 ? 1.0 : 0.0);
  return E;
}

inline DensityFunction negative_power_density(double q) {
  if (!(q > 0.0 && q < 1.0))
    throw DomainError("negative_power needs q in (0,1) for a convex integrand");
  DensityFunction E;
  std::ostringstream n;
  n << "negative_power q=" << q;
  E.name = n.str();
  E.value = [q](double c) { return -std::pow(c, q); };
  E.d1 = [q](double c) { return -q * std::pow(c, q - 1.0); };
  E.d2 = [q](double c) { return -q * (q - 1.0) * std::pow(c, q - 2.0); };
  E.recession = 0.0;
  return E;
}

inline DensityFunction boltzmann_density() {
  DensityFunction E;
  E.name = "boltzmann";
  E.value = [](double c) { return c > 0.0 ? c * std::log(c) : 0.0; };
  E.d1 = [](double c) { return std::log(c) + 1.0; };
  E.d2 = [](double c) { return 1.0 / c; };
  E.recession = inf;
  return E;
}

inline DensityFunction capped_linear_density(double kappa, double c_star) {
  if (!(c_star > 0.0)) throw NonpositiveParameter("capped_linear needs c_star > 0");
  DensityFunction E;
  std::ostringstream n;
  n << "capped_linear kappa=" << kappa << " c_star=" << c_star;
  E.name = n.str();
  E.value = [kappa, c_star](double c) { return c <= c_star ? kappa * c : inf; };
  E.d1 = [kappa](double) { return kappa; };
  E.d2 = [](double) { return 0.0; };
  E.recession = inf;
  E.domain_upper = c_star;
  E.smooth = false;
  return E;
}

inline DensityFunction sum_density(std::vector<DensityFunction> terms) {
  if (terms.empty()) throw DomainError("sum of densities needs at least one term");
  DensityFunction E;
  E.name = "sum(";
  for (std::size_t k = 0; k < terms.size(); ++k) E.name += (k ? ", " : "") + terms[k].name;
  E.name += ")";
  auto shared = std::make_shared<std::vector<DensityFunction>>(std::move(terms));
  E.value = [shared](double c) {
    double s = 0.0;
    for (const auto& t : *shared) s += t.value(c);
    return s;
  };
  bool all_d1 = true, all_d2 = true;
  for (const auto& t : *shared) {
    all_d1 = all_d1 && bool(t.d1);
    all_d2 = all_d2 && bool(t.d2);
  }
  if (all_d1)
    E.d1 = [shared](double c) {
      double s = 0.0;
      for (const auto& t : *shared) s += t.d1(c);
      return s;
    };
  if (all_d2)
    E.d2 = [shared](double c) {
      double s = 0.0;
      for (const auto& t : *shared) s += t.d2(c);
      return s;
    };
  E.recession = 0.0;
  E.domain_upper = inf;
  E.smooth = true;
  E.sampled_only = false;
  for (const auto& t : *shared) {
    E.recession = (t.recession == inf || E.recession == inf) ? inf : E.recession + t.recession;
    E.domain_upper = std::min(E.domain_upper, t.domain_upper);
    E.smooth = E.smooth && t.smooth;
    E.sampled_only = E.sampled_only || t.sampled_only;
  }
  return E;
}

// Tabulated integrand: piecewise-linear values through (0,0) and the given
// points with linear extrapolation, derivatives from a local quadratic
// least-squares fit (five nearest samples). Convexity of the data can only
// be spot-checked, so reports carry the sampled-only flag.
inline DensityFunction tabulated_density(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  if (pts.size() < 3 || pts.front().first <= 0.0)
    throw DomainError("tabulated density needs at least three points with c > 0");
  pts.insert(pts.begin(), {0.0, 0.0});
  auto shared = std::make_shared<std::vector<std::pair<double, double>>>(std::move(pts));
  DensityFunction E;
  E.name = "tabulated";
  E.sampled_only = true;
  const auto& tab = *shared;
  E.recession = (tab.back().second - tab[tab.size() - 2].second) /
                (tab.back().first - tab[tab.size() - 2].first);
  E.value = [shared](double c) {
    const auto& t = *shared;
    if (c <= 0.0) return 0.0;
    if (c >= t.back().first) {
      std::size_t n = t.size();
      double slope = (t[n - 1].second - t[n - 2].second) / (t[n - 1].first - t[n - 2].first);
      return t.back().second + slope * (c - t.back().first);
    }
    std::size_t hi = 1;
    while (t[hi].first < c) ++hi;
    double w = (c - t[hi - 1].first) / (t[hi].first - t[hi - 1].first);
    return (1.0 - w) * t[hi - 1].second + w * t[hi].second;
  };
  // local quadratic fit a + b c + e c^2 around the bracketing segment
  auto fit = [shared](double c) -> std::array<double, 3> {
    const auto& t = *shared;
    std::size_t hi = 1;
    while (hi + 1 < t.size() && t[hi].first < c) ++hi;
    std::size_t lo = (hi >= 3) ? hi - 3 : 0;
    std::size_t up = std::min(lo + 5, t.size());
    if (up - lo < 3) lo = up - 3;
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, r0 = 0, r1 = 0, r2 = 0;
    for (std::size_t k = lo; k < up; ++k) {
      double x = t[k].first, y = t[k].second;
      double x2 = x * x;
      s0 += 1; s1 += x; s2 += x2; s3 += x2 * x; s4 += x2 * x2;
      r0 += y; r1 += y * x; r2 += y * x2;
    }
    // solve the 3x3 normal equations by Cramer
    auto det3 = [](double a, double b, double c_, double d, double e, double f_, double g,
                   double h, double i) {
      return a * (e * i - f_ * h) - b * (d * i - f_ * g) + c_ * (d * h - e * g);
    };
    double D = det3(s0, s1, s2, s1, s2, s3, s2, s3, s4);
    double A = det3(r0, s1, s2, r1, s2, s3, r2, s3, s4) / D;
    double B = det3(s0, r0, s2, s1, r1, s3, s2, r2, s4) / D;
    double Cq = det3(s0, s1, r0, s1, s2, r1, s2, s3, r2) / D;
    return {A, B, Cq};
  };
  E.d1 = [fit](double c) {
    auto q = fit(c);
    return q[1] + 2.0 * q[2] * c;
  };
  E.d2 = [fit](double c) { return 2.0 * fit(c)[2]; };
  return E;
}

// ---------------------------------------------------------------------------
// Derivative shorthands and the 2x2 condition matrix.
// ---------------------------------------------------------------------------

namespace detail {

inline double fd_d1(const DensityFunction& E, double c) {
  double h = std::max(1e-6, 1e-6 * c);
  return (E.value(c + h) - E.value(c - h)) / (2.0 * h);
}

// Richardson-extrapolated central second difference: eps_2 enters a
// determinant, so plain second differences are too noisy.
inline double fd_d2(const DensityFunction& E, double c) {
  double h = std::max(1e-4, 1e-4 * c);
  auto dd = [&](double step) {
    return (E.value(c + step) - 2.0 * E.value(c) + E.value(c - step)) / (step * step);
  };
  double a = dd(h), b = dd(0.5 * h);
  return (4.0 * b - a) / 3.0;
}

}  // namespace detail

inline double eps(const DensityFunction& E, double c, int j) {
  if (!(c > 0.0) || c >= E.domain_upper) throw OutsideDomain("eps: c outside the domain interior");
  switch (j) {
    case 0:
      return E.value(c);
    case 1:
      return c * (E.d1 ? E.d1(c) : detail::fd_d1(E, c));
    case 2:
      return c * c * (E.d2 ? E.d2(c) : detail::fd_d2(E, c));
    default:
      throw DomainError("eps order must be 0, 1 or 2");
  }
}

struct Sym2 {
  double a11 = 0.0, a12 = 0.0, a22 = 0.0;
  double det() const { return a11 * a22 - a12 * a12; }
  double min_eigenvalue() const {
    double mid = 0.5 * (a11 + a22);
    double rad = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    return mid - rad;
  }
  double norm() const { return std::max({std::abs(a11), std::abs(a22), std::abs(a12)}); }
};

inline Sym2 bbB_matrix(const DensityFunction& E, double c, int d) {
  double e0 = eps(E, c, 0), e1 = eps(E, c, 1), e2 = eps(E, c, 2);
  Sym2 B;
  B.a11 = e2 - double(d - 1) / d * (e1 - e0);
  B.a12 = e2 - 0.5 * (e1 - e0);
  B.a22 = e2 + 0.5 * e1;
  return B;
}

// N_E(rho, gamma) = (rho/gamma)^d E(gamma^{2+d}/rho^d); satisfies the scaling
// identity N_E(s^{1+d/2} rho, s gamma) = s^2 N_E(rho, gamma).
inline double N_E(const DensityFunction& E, double rho, double gamma, int d) {
  if (!(rho > 0.0) || !(gamma > 0.0)) throw DomainError("N_E needs rho, gamma > 0");
  double ratio = std::pow(rho / gamma, d);
  double c = std::pow(gamma, 2 + d) / std::pow(rho, d);
  double v = E.value(c);
  if (v == inf) return inf;
  return ratio * v;
}

// ---------------------------------------------------------------------------
// Certification. The lambda-shifted positivity test is
//   bbB(c) >= diag(0, lambda c / 2)  together with  (d-1)(eps1 - eps0) >= 0,
// equivalently the unshifted conditions for the integrand c -> E(c) - lambda c.
// In the chord normalization of empirical_geodesic_convexity (which carries
// the factor 1/2 on the quadratic term) a certificate at lambda corresponds
// to a chord coefficient of 2 lambda; the mass integrand E(c) = c certifies
// at lambda = 1 and satisfies the chord inequality with coefficient 2.
// ---------------------------------------------------------------------------

struct ConditionVerdict {
  bool pass = true;
  double worst_margin = inf;  // signed; negative = violated
  double worst_c = 0.0;

  void update(double margin, double c) {
    if (margin < worst_margin) {
      worst_margin = margin;
      worst_c = c;
    }
  }
};

struct ConvexityReport {
  int d = 0;
  double lambda = 0.0;
  bool sampled_only = false;
  ConditionVerdict b_psd, monotone_h, hellinger, mccann, extra;
  bool overall = false;
};

inline std::vector<double> default_c_grid(const DensityFunction& E, int points = 400) {
  double hi = std::min(E.domain_upper, 1e6);
  double lo = 1e-6;
  if (hi <= lo) hi = E.domain_upper * 0.999;
  std::vector<double> grid(points);
  for (int k = 0; k < points; ++k) {
    double u = double(k) / (points - 1);
    grid[k] = lo * std::pow(hi * 0.999999 / lo, u);
  }
  return grid;
}

namespace detail {

inline ConvexityReport certify_smooth(const DensityFunction& E, int d, double lambda,
                                      const std::vector<double>& c_grid) {
  ConvexityReport rep;
  rep.d = d;
  rep.lambda = lambda;
  rep.sampled_only = E.sampled_only;
  for (double c : c_grid) {
    Sym2 B = bbB_matrix(E, c, d);
    double e0 = eps(E, c, 0), e1 = eps(E, c, 1), e2 = eps(E, c, 2);
    // margins are measured against the size of the derivative data, not the
    // matrix entries: at family boundaries the entries cancel exactly
    double scale =
        std::max({std::abs(e0), std::abs(e1), std::abs(e2), std::abs(lambda) * c, 1e-30});
    double tol = 1e-9 * scale;

    Sym2 shifted = B;
    shifted.a22 -= 0.5 * lambda * c;
    rep.b_psd.update(shifted.min_eigenvalue() + tol, c);
    rep.monotone_h.update(double(d - 1) * (e1 - e0) + tol, c);
    rep.hellinger.update(B.a22 - 0.5 * lambda * c + tol, c);
    rep.mccann.update(B.a11 + tol, c);
    rep.extra.update((d + 2) * e1 - 2.0 * e0 - double(d) * lambda * c + tol, c);
  }
  for (ConditionVerdict* v : {&rep.b_psd, &rep.monotone_h, &rep.hellinger, &rep.mccann, &rep.extra})
    v->pass = v->worst_margin >= 0.0;
  rep.overall = rep.b_psd.pass && rep.monotone_h.pass;
  return rep;
}

// Sampled path for nonsmooth integrands: midpoint convexity of N on its
// domain, convexity of the finite-value region, and rho-monotonicity, all for
// the shifted integrand E - lambda c.
inline ConvexityReport certify_sampled(const DensityFunction& E, int d, double lambda) {
  ConvexityReport rep;
  rep.d = d;
  rep.lambda = lambda;
  rep.sampled_only = true;
  DensityFunction shifted = E;
  auto base = std::make_shared<DensityFunction>(E);
  shifted.value = [base, lambda](double c) {
    double v = base->value(c);
    return (v == inf) ? inf : v - lambda * c;
  };

  SplitMix64 rng(31337);
  auto draw = [&] { return std::exp(rng.uniform(std::log(1e-3), std::log(1e3))); };
  auto c_of = [&](double rho, double gamma) {
    return std::pow(gamma, 2 + d) / std::pow(rho, d);
  };
  // midpoint convexity of the shifted N on random pairs; a finite-endpoint
  // pair with an infinite midpoint means the finite-value region itself is
  // not convex
  for (int trial = 0; trial < 4000; ++trial) {
    double r1 = draw(), g1 = draw(), r2 = draw(), g2 = draw();
    double n1 = N_E(shifted, r1, g1, d), n2 = N_E(shifted, r2, g2, d);
    if (n1 == inf || n2 == inf) continue;
    double rm = 0.5 * (r1 + r2), gm = 0.5 * (g1 + g2);
    double nm = N_E(shifted, rm, gm, d);
    if (nm == inf) {
      rep.b_psd.update(-1.0, c_of(rm, gm));
      continue;
    }
    double scale = std::max({std::abs(n1), std::abs(n2), 1.0});
    rep.b_psd.update(0.5 * (n1 + n2) - nm + 1e-9 * scale, c_of(rm, gm));
  }
  // rho-monotonicity (void for d = 1): N may only decrease as rho grows
  if (d >= 2) {
    for (int trial = 0; trial < 2000; ++trial) {
      double g = draw(), r = draw();
      double n_lo = N_E(shifted, r, g, d), n_hi = N_E(shifted, 1.2 * r, g, d);
      if (n_lo == inf) continue;  // anything below +inf is a decrease
      if (n_hi == inf) {
        rep.monotone_h.update(-1.0, c_of(r, g));
        continue;
      }
      double scale = std::max(std::abs(n_lo), 1.0);
      rep.monotone_h.update(n_lo - n_hi + 1e-9 * scale, c_of(1.2 * r, g));
    }
  }
  rep.hellinger.update(1.0, 0.0);  // folded into the midpoint test
  rep.mccann.update(1.0, 0.0);
  rep.extra.update(1.0, 0.0);
  for (ConditionVerdict* v : {&rep.b_psd, &rep.monotone_h, &rep.hellinger, &rep.mccann, &rep.extra})
    v->pass = v->worst_margin >= 0.0;
  rep.overall = rep.b_psd.pass && rep.monotone_h.pass;
  return rep;
}

}  // namespace detail

inline ConvexityReport certify(const DensityFunction& E, int d, double lambda,
                               const std::vector<double>& c_grid) {
  if (d < 1) throw DomainError("dimension must be positive");
  if (c_grid.empty()) throw EmptyGrid("certify needs a nonempty c grid");
  if (!E.smooth) return detail::certify_sampled(E, d, lambda);
  return detail::certify_smooth(E, d, lambda, c_grid);
}

inline ConvexityReport certify(const DensityFunction& E, int d, double lambda) {
  return certify(E, d, lambda, default_c_grid(E));
}

// ---------------------------------------------------------------------------
// Necessary monotonicity, in its three equivalent forms:
//   (A) c -> c^{-2/(d+2)} E(c) is non-decreasing,
//   (B) (1 - 4/d^2) rho dN/drho + gamma dN/dgamma >= 0,
//   (C) s -> N(s^{1-4/d^2} rho, s gamma) is non-decreasing.
// ---------------------------------------------------------------------------

struct MonotonicityVerdicts {
  bool A = true, B = true, C = true;
  bool agree() const { return A == B && B == C; }
};

inline MonotonicityVerdicts monotonicity_suite(const DensityFunction& E, int d,
                                               const std::vector<double>& c_grid) {
  MonotonicityVerdicts out;
  double prev = -inf;
  double worstA = 0.0;
  std::vector<double> valsA;
  for (double c : c_grid) {
    double v = std::pow(c, -2.0 / (d + 2)) * E.value(c);
    valsA.push_back(v);
  }
  for (std::size_t k = 1; k < valsA.size(); ++k)
    worstA = std::min(worstA, valsA[k] - valsA[k - 1] +
                                  1e-10 * std::max(std::abs(valsA[k]), std::abs(valsA[k - 1])));
  out.A = worstA >= 0.0;
  (void)prev;

  SplitMix64 rng(4242);
  double factor = 1.0 - 4.0 / double(d * d);
  bool okB = true, okC = true;
  for (int trial = 0; trial < 200; ++trial) {
    double rho = std::exp(rng.uniform(std::log(0.05), std::log(20.0)));
    double gamma = std::exp(rng.uniform(std::log(0.05), std::log(20.0)));
    double c = std::pow(gamma, 2 + d) / std::pow(rho, d);
    if (!(c > 1e-6 && c < std::min(E.domain_upper, 1e6))) continue;
    double h = 1e-6;
    double dr = (N_E(E, rho * (1 + h), gamma, d) - N_E(E, rho * (1 - h), gamma, d)) / (2 * h * rho);
    double dg =
        (N_E(E, rho, gamma * (1 + h), d) - N_E(E, rho, gamma * (1 - h), d)) / (2 * h * gamma);
    double val = factor * rho * dr + gamma * dg;
    double scale = std::max(std::abs(N_E(E, rho, gamma, d)), 1.0);
    if (val < -1e-5 * scale) okB = false;

    double n_prev = -inf;
    bool increasing = true;
    for (double s = 0.5; s <= 2.01; s += 0.125) {
      double n = N_E(E, std::pow(s, factor) * rho, s * gamma, d);
      if (n < n_prev - 1e-9 * std::max(std::abs(n), 1.0)) increasing = false;
      n_prev = n;
    }
    if (!increasing) okC = false;
  }
  out.B = okB;
  out.C = okC;
  return out;
}

// ---------------------------------------------------------------------------
// Optimal convexity modulus: lambda_opt = inf_c 2 det bbB(c) / (c bbB_11(c)),
// grid minimization refined by golden section in log c.
// ---------------------------------------------------------------------------

struct LambdaOpt {
  double lambda = 0.0;
  double c_star = 0.0;
};

inline LambdaOpt lambda_opt(const DensityFunction& E, int d, const std::vector<double>& c_grid) {
  if (c_grid.empty()) throw EmptyGrid("lambda_opt needs a nonempty c grid");
  auto ratio = [&](double c) {
    Sym2 B = bbB_matrix(E, c, d);
    if (!(B.a11 > 1e-14 * std::max(B.norm(), 1e-300)))
      throw McCannDegenerate("lambda_opt: bbB_11 <= 0 (strict McCann condition fails)");
    return 2.0 * B.det() / (c * B.a11);
  };
  std::size_t best = 0;
  double best_val = inf;
  for (std::size_t k = 0; k < c_grid.size(); ++k) {
    double v = ratio(c_grid[k]);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  double lo = c_grid[best > 0 ? best - 1 : best];
  double hi = c_grid[std::min(best + 1, c_grid.size() - 1)];
  double la = std::log(lo), lb = std::log(hi);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = lb - gr * (lb - la), x2 = la + gr * (lb - la);
  double f1 = ratio(std::exp(x1)), f2 = ratio(std::exp(x2));
  for (int it = 0; it < 200 && (lb - la) > 1e-12; ++it) {
    if (f1 <= f2) {
      lb = x2;
      x2 = x1;
      f2 = f1;
      x1 = lb - gr * (lb - la);
      f1 = ratio(std::exp(x1));
    } else {
      la = x1;
      x1 = x2;
      f1 = f2;
      x2 = la + gr * (lb - la);
      f2 = ratio(std::exp(x2));
    }
  }
  double c_star = std::exp(0.5 * (la + lb));
  return {ratio(c_star), c_star};
}

inline LambdaOpt lambda_opt(const DensityFunction& E, int d) {
  return lambda_opt(E, d, default_c_grid(E));
}

// ---------------------------------------------------------------------------
// Empirical chord check along computed geodesics:
//   calE(mu_t) <= (1-t) calE(mu_0) + t calE(mu_1) - (lambda/2) t(1-t) HK^2.
// ---------------------------------------------------------------------------

struct EmpiricalConvexityReport {
  double hk_squared = 0.0;
  double max_violation = 0.0;
  std::vector<std::array<double, 3>> profile;  // (t, value, chord)
};

namespace detail {

inline EmpiricalConvexityReport chord_report(const std::vector<double>& times,
                                             const std::vector<double>& values, double hk2,
                                             double lambda) {
  EmpiricalConvexityReport rep;
  rep.hk_squared = hk2;
  double v0 = values.front(), v1 = values.back();
  for (std::size_t k = 0; k < times.size(); ++k) {
    double t = times[k];
    double chord = (1.0 - t) * v0 + t * v1 - 0.5 * lambda * t * (1.0 - t) * hk2;
    rep.profile.push_back({t, values[k], chord});
    rep.max_violation = std::max(rep.max_violation, values[k] - chord);
  }
  return rep;
}

inline std::vector<double> uniform_times(int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = double(k) / (n - 1);
  return t;
}

}  // namespace detail

// Pure-growth geodesic from the zero measure: mu_t = t^2 mu_1, evaluated on
// the grid density of mu_1.
inline EmpiricalConvexityReport empirical_geodesic_convexity_growth(const DensityFunction& E,
                                                                    const GridDensity& c1,
                                                                    double lambda, int n_times) {
  std::vector<double> times = detail::uniform_times(n_times);
  std::vector<double> values;
  for (double t : times) {
    double acc = 0.0;
    for (std::size_t k = 0; k < c1.values.size(); ++k) {
      double v = E.value(t * t * c1.values[k]);
      if (v == inf) throw RecessionInfinite("functional infinite along the growth geodesic");
      acc += v * c1.geom.quadrature_weight(k);
    }
    values.push_back(acc);
  }
  return detail::chord_report(times, values, c1.total_mass(), lambda);
}

// Two absolutely continuous endpoints given as everywhere-positive grid
// densities on a common geometry. The transport potential is extracted from
// the solved plan (sigma_0 per node) and the functional is evaluated in
// Lagrangian form: calE(mu_t) = integral of delta E(c_0 alpha/delta).
inline EmpiricalConvexityReport empirical_geodesic_convexity_grid(const DensityFunction& E,
                                                                  const GridDensity& c0,
                                                                  const GridDensity& c1,
                                                                  double lambda, int n_times,
                                                                  const LetOptions& opt = {}) {
  if (!c0.geom.same_as(c1.geom))
    throw DimensionMismatch("empirical_geodesic_convexity: densities on different grids");
  for (double v : c0.values)
    if (!(v > 0.0))
      throw DomainError("empirical_geodesic_convexity: c0 must be positive on every node");

  DiscreteMeasure mu0 = grid_to_measure(c0), mu1 = grid_to_measure(c1);
  LetSolution sol = solve_let(mu0, mu1, opt);

  // sigma_0 per node of the c0 grid (atom order equals node order: c0 > 0)
  GridFunction xi0(c0.geom);
  for (std::size_t k = 0; k < xi0.values.size(); ++k)
    xi0.values[k] = 0.5 * (sol.plan.sigma0[k] - 1.0);
  GridFlowContext ctx{xi0, 0.0};

  std::vector<double> times = detail::uniform_times(n_times);
  std::vector<double> values;
  for (double t : times) {
    double acc = 0.0;
    for (std::size_t k = 0; k < c0.values.size(); ++k) {
      FlowNodeState st = flow_node_state(ctx, t, k);
      if (st.delta <= 0.0) throw DegenerateJacobian("empirical_geodesic_convexity: det DT <= 0");
      double v = E.value(c0.values[k] * st.alpha / st.delta);
      if (v == inf) throw RecessionInfinite("functional infinite along the geodesic");
      acc += st.delta * v * c0.geom.quadrature_weight(k);
    }
    values.push_back(acc);
  }
  return detail::chord_report(times, values, sol.hk_squared, lambda);
}

// Purely atomic endpoints with a finite recession constant: the functional
// reduces to E'_inf times the mass, which is exactly quadratic along the
// geodesic.
inline EmpiricalConvexityReport empirical_geodesic_convexity_discrete(const DensityFunction& E,
                                                                      const DiscreteMeasure& mu0,
                                                                      const DiscreteMeasure& mu1,
                                                                      double lambda, int n_times,
                                                                      const LetOptions& opt = {}) {
  if (E.recession == inf)
    throw RecessionInfinite("singular (atomic) mass with infinite recession constant");
  GeodesicCurve curve = build_geodesic(mu0, mu1, opt);
  std::vector<double> times = detail::uniform_times(n_times);
  std::vector<double> values;
  for (double t : times) values.push_back(E.recession * sample(curve, t).total_mass());
  return detail::chord_report(times, values, curve.hk_squared, lambda);
}

}  // namespace hk
