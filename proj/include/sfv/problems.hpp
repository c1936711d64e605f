#pragma once

#include <functional>
#include <string>

#include "sfv/config.hpp"
#include "sfv/field.hpp"
#include "sfv/forest_mesh.hpp"

namespace sfv {

// One benchmark setup: the law, the stochastic measure, the combined domain,
// and the initial data as a pointwise closure u0(x, y).  `exact` is the
// closed-form solution where one exists (pure transport); it takes the
// physical point, the time, and the stochastic parameter.
struct BenchmarkProblem {
  std::string id;
  ConservationLaw law;
  ProductMeasure measure;
  DomainSpec domain;
  std::function<State(double x, double y)> initial;
  std::function<double(double x, double t, double y)> exact;
  bool has_exact = false;
};

// Builds the benchmark named by the config; the config's law, measure,
// domain, and root resolution all enter.  With y_constant set, the sine
// benchmarks drop their stochastic factor and the three-state tube freezes
// y at the measure mean.
BenchmarkProblem make_problem(const RunConfig& cfg);

// Cell averages of the initial closure: per cell, tensor Gauss-Lobatto in x
// against the measure-weighted rule in y, divided by the cell measure h_T.
// Endpoint nodes are pulled inside the cell by a relative 1e-12 so closures
// with jumps on cell interfaces average their own side.  Inadmissible Euler
// states at any node raise ConfigError.
SolutionField init_field(const ForestMesh& mesh, const BenchmarkProblem& prob,
                         int quad_pts);

// Cell averages of the exact solution at time t (problems with has_exact).
// Uses a rule two nodes richer than requested so projection error stays far
// below the discretization error being measured against it.
SolutionField exact_average_field(const ForestMesh& mesh,
                                  const BenchmarkProblem& prob, double t,
                                  int quad_pts);

}  // namespace sfv
