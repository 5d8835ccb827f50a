#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hk {

using Vec = std::vector<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double half_pi = std::numbers::pi / 2.0;
inline constexpr double inf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define HK_DEFINE_ERROR(Name)                    \
  struct Name : Error {                          \
    using Error::Error;                          \
  }

HK_DEFINE_ERROR(DimensionMismatch);
HK_DEFINE_ERROR(NonpositiveParameter);
HK_DEFINE_ERROR(DegenerateGeodesic);
HK_DEFINE_ERROR(IndexOutOfRange);
HK_DEFINE_ERROR(TooLarge);
HK_DEFINE_ERROR(NotOptimal);
HK_DEFINE_ERROR(VertexRegion);
HK_DEFINE_ERROR(InfeasiblePotential);
HK_DEFINE_ERROR(OrderViolation);
HK_DEFINE_ERROR(LeftContactSet);
HK_DEFINE_ERROR(DomainError);
HK_DEFINE_ERROR(DegenerateJacobian);
HK_DEFINE_ERROR(UndefinedWeight);
HK_DEFINE_ERROR(NotAPartition);
HK_DEFINE_ERROR(McCannDegenerate);
HK_DEFINE_ERROR(OutsideDomain);
HK_DEFINE_ERROR(EmptyGrid);
HK_DEFINE_ERROR(RecessionInfinite);
HK_DEFINE_ERROR(ParseError);

#undef HK_DEFINE_ERROR

struct NoConvergence : Error {
  int iterations;
  double residual;
  NoConvergence(int iters, double res)
      : Error("solver did not converge after " + std::to_string(iters) +
              " iterations (residual " + std::to_string(res) + ")"),
        iterations(iters),
        residual(res) {}
};

// ---------------------------------------------------------------------------
// Small vector helpers
// ---------------------------------------------------------------------------

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec sub(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
  return r;
}

inline Vec add(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] + b[k];
  return r;
}

inline Vec scale(double c, const Vec& a) {
  Vec r(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = c * a[k];
  return r;
}

inline double dist(const Vec& a, const Vec& b) { return norm(sub(a, b)); }

// Vector-valued version of a scalar function f with f(0)=0:
// bold_f(z) = f(|z|) z/|z|, extended by 0 at z = 0 (removable singularity).
inline Vec bold(double (*f)(double), const Vec& z) {
  double n = norm(z);
  if (n == 0.0) return Vec(z.size(), 0.0);
  return scale(f(n) / n, z);
}

inline Vec arctan_vec(const Vec& w) { return bold(std::atan, w); }
inline Vec sin_vec(const Vec& z) { return bold(std::sin, z); }
inline Vec tan_vec(const Vec& z) { return bold(std::tan, z); }

// cos_a(r) = cos(min(a, r)), the truncated cosine.
inline double cos_trunc(double a, double r) { return std::cos(std::min(a, std::abs(r))); }

// cos^2_{pi/2}(r)
inline double cos2_halfpi(double r) {
  double c = cos_trunc(half_pi, r);
  return c * c;
}

// Transport cost l(r) = -log cos^2(r) for r < pi/2, +inf otherwise.
inline double transport_cost(double r) {
  r = std::abs(r);
  if (r >= half_pi) return inf;
  double c = std::cos(r);
  return -std::log(c * c);
}

// L_1(z) = l(|z|)/2, the static cost on displacements.
inline double cost_L1(double r) { return 0.5 * transport_cost(r); }

// ---------------------------------------------------------------------------
// Deterministic parallel loop: output of iteration i must not depend on any
// other iteration, so the result is independent of the thread count.
// ---------------------------------------------------------------------------

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::size_t nt = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += nt) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Splitmix64; used only to derive reproducible pseudo-random test data and
// seeded solver initializations.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

}  // namespace hk
