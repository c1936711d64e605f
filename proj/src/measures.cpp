#include "sfv/measures.hpp"

#include <algorithm>
#include <cmath>

namespace sfv {

namespace {

constexpr double kPi = 3.14159265358979323846;

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}

// Phi(z) via erfc keeps relative accuracy deep in the lower tail.
double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// Continued fraction for the regularized incomplete beta (modified Lentz).
double ibeta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double eps = 1e-16;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

double beta_density_unnorm(double alpha, double beta, double y) {
  if (y <= 0.0 || y >= 1.0) {
    // Limits of y^(a-1)(1-y)^(b-1) at the endpoints.
    if (y <= 0.0) return alpha > 1.0 ? 0.0 : (alpha == 1.0 ? std::pow(1.0 - y, beta - 1.0) : HUGE_VAL);
    return beta > 1.0 ? 0.0 : (beta == 1.0 ? std::pow(y, alpha - 1.0) : HUGE_VAL);
  }
  return std::exp((alpha - 1.0) * std::log(y) + (beta - 1.0) * std::log1p(-y));
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
  // Branch switch keeps the continued fraction in its fast-converging regime.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * ibeta_cf(a, b, x) / a;
  }
  return 1.0 - front * ibeta_cf(b, a, 1.0 - x) / b;
}

Measure1D make_uniform(double a, double b) {
  if (!(a < b)) throw ConfigError("uniform measure needs a < b");
  Measure1D m;
  m.kind = MeasureKind::uniform;
  m.a = a;
  m.b = b;
  return m;
}

Measure1D make_beta(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw ConfigError("beta measure needs positive shape parameters");
  Measure1D m;
  m.kind = MeasureKind::beta;
  m.a = 0.0;
  m.b = 1.0;
  m.alpha = alpha;
  m.beta = beta;
  return m;
}

Measure1D make_truncated_normal(double mean, double sd, double a, double b) {
  if (!(sd > 0.0)) throw ConfigError("truncated normal needs sd > 0");
  if (!(a < b)) throw ConfigError("truncated normal needs a < b");
  Measure1D m;
  m.kind = MeasureKind::truncated_normal;
  m.a = a;
  m.b = b;
  m.mean = mean;
  m.sd = sd;
  return m;
}

double density(const Measure1D& m, double y) {
  if (y < m.a || y > m.b) return 0.0;
  switch (m.kind) {
    case MeasureKind::uniform:
      return 1.0 / (m.b - m.a);
    case MeasureKind::beta: {
      double lbeta =
          std::lgamma(m.alpha) + std::lgamma(m.beta) - std::lgamma(m.alpha + m.beta);
      return beta_density_unnorm(m.alpha, m.beta, y) * std::exp(-lbeta);
    }
    case MeasureKind::truncated_normal: {
      double z = (y - m.mean) / m.sd;
      double norm = std_normal_cdf((m.b - m.mean) / m.sd) -
                    std_normal_cdf((m.a - m.mean) / m.sd);
      return std_normal_pdf(z) / (m.sd * norm);
    }
  }
  return 0.0;
}

double cdf(const Measure1D& m, double y) {
  if (y <= m.a) return 0.0;
  if (y >= m.b) return 1.0;
  switch (m.kind) {
    case MeasureKind::uniform:
      return (y - m.a) / (m.b - m.a);
    case MeasureKind::beta:
      return reg_incomplete_beta(m.alpha, m.beta, y);
    case MeasureKind::truncated_normal: {
      double za = (m.a - m.mean) / m.sd;
      double zb = (m.b - m.mean) / m.sd;
      double z = (y - m.mean) / m.sd;
      return (std_normal_cdf(z) - std_normal_cdf(za)) /
             (std_normal_cdf(zb) - std_normal_cdf(za));
    }
  }
  return 0.0;
}

double inverse_cdf(const Measure1D& m, double p) {
  p = std::clamp(p, 0.0, 1.0);
  if (p <= 0.0) return m.a;
  if (p >= 1.0) return m.b;
  if (m.kind == MeasureKind::uniform) return m.a + p * (m.b - m.a);
  // Bisection with Newton acceleration on the monotone CDF.
  double lo = m.a, hi = m.b;
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double f = cdf(m, y) - p;
    if (f > 0.0)
      hi = y;
    else
      lo = y;
    double d = density(m, y);
    double step = (d > 1e-300 && std::isfinite(d)) ? f / d : 0.0;
    double ynext = y - step;
    if (!(ynext > lo && ynext < hi)) ynext = 0.5 * (lo + hi);
    if (std::fabs(ynext - y) < 1e-15 * (m.b - m.a) || hi - lo < 1e-15 * (m.b - m.a)) {
      y = ynext;
      break;
    }
    y = ynext;
  }
  return std::clamp(y, m.a, m.b);
}

double mass(const Measure1D& m, double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("mass: interval endpoints out of order");
  return std::max(0.0, cdf(m, hi) - cdf(m, lo));
}

double conditional_mean(const Measure1D& m, double lo, double hi) {
  double p = mass(m, lo, hi);
  if (!(p > 0.0) || !std::isfinite(p))
    throw DegenerateCellError("conditional_mean: interval carries no mass");
  double cm = 0.0;
  switch (m.kind) {
    case MeasureKind::uniform:
      cm = 0.5 * (lo + hi);
      break;
    case MeasureKind::beta: {
      // int y dBeta(a,b) over [lo,hi] = a/(a+b) * (I_hi(a+1,b) - I_lo(a+1,b)).
      double num = reg_incomplete_beta(m.alpha + 1.0, m.beta, hi) -
                   reg_incomplete_beta(m.alpha + 1.0, m.beta, lo);
      cm = (m.alpha / (m.alpha + m.beta)) * num / p;
      break;
    }
    case MeasureKind::truncated_normal: {
      double zlo = (lo - m.mean) / m.sd;
      double zhi = (hi - m.mean) / m.sd;
      double dphi = std_normal_pdf(zhi) - std_normal_pdf(zlo);
      double dPhi = std_normal_cdf(zhi) - std_normal_cdf(zlo);
      cm = m.mean - m.sd * dphi / dPhi;
      break;
    }
  }
  // Tiny-mass intervals can lose all significant digits in the CDF
  // differences; fall back to the midpoint, which stays inside the cell.
  if (!(cm > lo && cm < hi)) cm = 0.5 * (lo + hi);
  return cm;
}

QuadratureRule lobatto_rule(double lo, double hi, int n) {
  if (n < 2) throw ConfigError("lobatto_rule needs at least 2 nodes");
  // Reference nodes on [-1,1]: endpoints plus the roots of P'_{n-1}; computed
  // by Newton iteration on the Legendre recurrence from Chebyshev guesses.
  std::vector<double> x(n), w(n);
  const int m = n - 1;
  for (int i = 0; i < n; ++i) {
    double xi = std::cos(kPi * double(i) / double(m));
    for (int it = 0; it < 100; ++it) {
      // Evaluate P_m and P_{m-1}.
      double p0 = 1.0, p1 = xi;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      // Newton step for (1-x^2) P'_m(x) = 0 expressed through L_m, L_{m-1}.
      double dx = (xi * p1 - p0) / (double(m + 1) * p1);
      xi -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = xi;
    for (int k = 2; k <= m; ++k) {
      double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    x[n - 1 - i] = xi;
    w[n - 1 - i] = 2.0 / (double(m) * double(m + 1) * p1 * p1);
  }
  x.front() = -1.0;
  x.back() = 1.0;
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * x[i];
    rule.weights[i] = half * w[i];
  }
  rule.nodes.front() = lo;
  rule.nodes.back() = hi;
  return rule;
}

QuadratureRule quadrature(const Measure1D& m, double lo, double hi, int n) {
  QuadratureRule rule = lobatto_rule(lo, hi, n);
  for (int i = 0; i < n; ++i) {
    double d = density(m, rule.nodes[i]);
    if (!std::isfinite(d)) {
      // Beta densities with a shape parameter below 1 blow up at the support
      // endpoints; evaluate a hair inside instead of poisoning the rule.
      double inset = 1e-12 * (hi - lo);
      double y = (i == 0) ? rule.nodes[i] + inset : rule.nodes[i] - inset;
      d = density(m, y);
    }
    rule.weights[i] *= d;
  }
  return rule;
}

}  // namespace sfv
