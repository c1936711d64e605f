#include "sfv/problems.hpp"

#include <cmath>

namespace sfv {

namespace {

constexpr double kPi = 3.14159265358979323846;

State three_state(double x, double y) {
  State u{};
  if (x < 0.5) {
    u = {1.0, 0.0, 0.5 + 2.5 * y};
  } else if (x < 0.75) {
    u = {0.125, 0.0, 0.25};
  } else {
    u = {0.5, 0.0, 0.25 + 1.25 * y};
  }
  return u;
}

double measure_mean(const Measure1D& m) {
  return conditional_mean(m, m.support_lo(), m.support_hi());
}

// Tensor cell averages of an arbitrary closure.  `check` guards Euler
// admissibility at the evaluation nodes.
SolutionField average_closure(
    const ForestMesh& mesh, const ConservationLaw& law, int quad_pts,
    const std::function<State(double, double)>& f, bool check) {
  SolutionField out;
  out.comps = law.components;
  out.resize_for(mesh);
  const Measure1D& m = mesh.measure().factors[0];
  const std::vector<CellId>& act = mesh.active();
  for (std::size_t s = 0; s < act.size(); ++s) {
    const CellId c = act[s];
    const Box b = mesh.box(c);
    const QuadratureRule rx = lobatto_rule(b.lo[0], b.hi[0], quad_pts);
    const QuadratureRule ry = quadrature(m, b.lo[1], b.hi[1], quad_pts);
    const double dx = 1e-12 * (b.hi[0] - b.lo[0]);
    const double dy = 1e-12 * (b.hi[1] - b.lo[1]);
    double acc[kMaxComp] = {0, 0, 0};
    for (std::size_t i = 0; i < rx.nodes.size(); ++i) {
      const double x =
          std::min(std::max(rx.nodes[i], b.lo[0] + dx), b.hi[0] - dx);
      for (std::size_t j = 0; j < ry.nodes.size(); ++j) {
        const double y =
            std::min(std::max(ry.nodes[j], b.lo[1] + dy), b.hi[1] - dy);
        const State u = f(x, y);
        if (check && !admissible(law, u))
          throw ConfigError("inadmissible initial state at x=" +
                            std::to_string(x) + ", y=" + std::to_string(y));
        const double w = rx.weights[i] * ry.weights[j];
        for (int k = 0; k < law.components; ++k) acc[k] += w * u[k];
      }
    }
    const double h = mesh.cell_volume(c);
    for (int k = 0; k < law.components; ++k)
      out.data[s * std::size_t(law.components) + k] = acc[k] / h;
  }
  return out;
}

}  // namespace

BenchmarkProblem make_problem(const RunConfig& cfg) {
  BenchmarkProblem prob;
  prob.id = cfg.problem;
  switch (cfg.law.kind) {
    case LawKind::advection:
      prob.law = make_advection(cfg.law.speed);
      break;
    case LawKind::burgers:
      prob.law = make_burgers();
      break;
    case LawKind::euler:
      prob.law = make_euler(cfg.law.gamma);
      break;
  }
  prob.measure.factors = {cfg.measure};

  DomainSpec dom;
  dom.n_physical = 1;
  dom.n_stochastic = 1;
  dom.lo = {cfg.domain.x_lo, cfg.measure.support_lo()};
  dom.hi = {cfg.domain.x_hi, cfg.measure.support_hi()};
  dom.root_cells = {cfg.mesh.cells_per_dim, cfg.mesh.cells_per_dim};
  dom.boundary[0] = cfg.domain.boundary;
  prob.domain = dom;

  const bool flat = cfg.y_constant;
  if (cfg.problem == "transport") {
    const double a = cfg.law.speed;
    prob.initial = [flat](double x, double y) {
      State u{};
      u[0] = std::sin(4 * kPi * x) * (flat ? 1.0 : std::sin(4 * kPi * y));
      return u;
    };
    prob.exact = [flat, a](double x, double t, double y) {
      return std::sin(4 * kPi * (x - a * t)) *
             (flat ? 1.0 : std::sin(4 * kPi * y));
    };
    prob.has_exact = true;
  } else if (cfg.problem == "burgers_sine") {
    prob.initial = [flat](double x, double y) {
      State u{};
      u[0] = std::sin(2 * kPi * x) * (flat ? 1.0 : std::sin(2 * kPi * y));
      return u;
    };
  } else if (cfg.problem == "euler_three_state") {
    if (flat) {
      const double ym = measure_mean(cfg.measure);
      prob.initial = [ym](double x, double) { return three_state(x, ym); };
    } else {
      prob.initial = three_state;
    }
  } else {
    throw ConfigError("unknown problem '" + cfg.problem + "'");
  }
  return prob;
}

SolutionField init_field(const ForestMesh& mesh, const BenchmarkProblem& prob,
                         int quad_pts) {
  const bool euler = prob.law.kind == LawKind::euler;
  return average_closure(mesh, prob.law, quad_pts, prob.initial, euler);
}

SolutionField exact_average_field(const ForestMesh& mesh,
                                  const BenchmarkProblem& prob, double t,
                                  int quad_pts) {
  if (!prob.has_exact)
    throw ConfigError("problem '" + prob.id + "' has no closed-form solution");
  auto f = [&prob, t](double x, double y) {
    State u{};
    u[0] = prob.exact(x, t, y);
    return u;
  };
  return average_closure(mesh, prob.law, quad_pts + 2, f, false);
}

}  // namespace sfv
