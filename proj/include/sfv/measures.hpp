#pragma once

#include <vector>

#include "sfv/errors.hpp"

namespace sfv {

enum class MeasureKind { uniform, beta, truncated_normal };

// One-dimensional probability measure with closed-form density and CDF.
// Supported families: uniform(a,b), beta(alpha,beta) on [0,1], and a normal
// truncated to [a,b].  All masses and conditional means are exact up to
// special-function accuracy (~1e-14), not quadrature.
struct Measure1D {
  MeasureKind kind = MeasureKind::uniform;
  double a = 0.0, b = 1.0;          // support [a, b]
  double alpha = 1.0, beta = 1.0;   // beta family shape
  double mean = 0.0, sd = 1.0;      // truncated normal location/scale

  double support_lo() const { return a; }
  double support_hi() const { return b; }
};

Measure1D make_uniform(double a, double b);
Measure1D make_beta(double alpha, double beta);
Measure1D make_truncated_normal(double mean, double sd, double a, double b);

// Probability density at y (0 outside the support).
double density(const Measure1D& m, double y);

// P(Y <= y); clamps y to the support.  Nondecreasing, cdf(a)=0, cdf(b)=1.
double cdf(const Measure1D& m, double y);

// Generalized inverse of cdf; cdf(inverse_cdf(p)) == p to 1e-10.
double inverse_cdf(const Measure1D& m, double p);

// P(Y in [lo, hi]) for [lo, hi] inside the support.
double mass(const Measure1D& m, double lo, double hi);

// E[Y | Y in [lo, hi]].  Lies strictly inside (lo, hi) for nondegenerate
// intervals; throws DegenerateCellError when the interval carries no mass.
double conditional_mean(const Measure1D& m, double lo, double hi);

// Nodes and weights of an n-point quadrature rule.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Lobatto rule on [lo, hi] with plain (Lebesgue) weights; n >= 2 nodes,
// exact for polynomials of degree 2n-3, includes both endpoints.
QuadratureRule lobatto_rule(double lo, double hi, int n);

// Gauss-Lobatto rule on [lo, hi] with weights premultiplied by the density,
// so sum_i w_i f(y_i) approximates the measure-weighted integral of f and
// sum_i w_i reproduces mass(m, lo, hi) at the rule's polynomial accuracy.
QuadratureRule quadrature(const Measure1D& m, double lo, double hi, int n);

// Independent product of per-direction stochastic measures.
struct ProductMeasure {
  std::vector<Measure1D> factors;
};

// Regularized incomplete beta function I_x(a, b), exposed for tests.
double reg_incomplete_beta(double a, double b, double x);

}  // namespace sfv
