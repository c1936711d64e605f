#pragma once

// Shared helpers for the test suite: an adaptive quadrature oracle used to
// cross-check closed-form integrals, a log-log slope fit for convergence
// tests, and a small deterministic RNG so property tests are reproducible.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace testsup {

inline double simpson(const std::function<double(double)>& f, double a, double b) {
  double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double whole, double tol, int depth) {
  double c = 0.5 * (a + b);
  double left = simpson(f, a, c);
  double right = simpson(f, c, b);
  double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, c, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, c, b, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson integration; oracle-quality for smooth integrands.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13) {
  if (a == b) return 0.0;
  return adaptive_simpson_rec(f, a, b, simpson(f, a, b), tol, 60);
}

// Least-squares slope of log(err) against log(h).
inline double fit_slope(const std::vector<double>& h, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < h.size(); ++i) {
    if (!(err[i] > 0.0)) continue;
    double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// splitmix64: deterministic, seedable, no libc state.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed = 12345) : state(seed) {}
  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + int(next_u64() % std::uint64_t(hi - lo + 1));
  }
};

}  // namespace testsup
