#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <unordered_map>
#include <vector>

#include "sfv/transfer.hpp"
#include "test_support.hpp"

using namespace sfv;

namespace {

DomainSpec unit_domain(int nx_roots, int ny_roots,
                       BoundaryKind bc = BoundaryKind::periodic) {
  DomainSpec d;
  d.n_physical = 1;
  d.n_stochastic = 1;
  d.lo = {0.0, 0.0, 0.0, 0.0};
  d.hi = {1.0, 1.0, 0.0, 0.0};
  d.root_cells = {nx_roots, ny_roots, 1, 1};
  d.boundary[0] = bc;
  return d;
}

ProductMeasure uniform_measure() {
  ProductMeasure m;
  m.factors.push_back(make_uniform(0.0, 1.0));
  return m;
}

ProductMeasure beta_measure(double a, double b) {
  ProductMeasure m;
  m.factors.push_back(make_beta(a, b));
  return m;
}

RefinementPlan empty_plan(const ForestMesh& mesh) {
  RefinementPlan plan;
  plan.by_slot.assign(mesh.n_active(), PlanEntry{});
  return plan;
}

void fill_linear(const ForestMesh& mesh, SolutionField& f, double a, double bx,
                 double by) {
  const std::vector<CellId>& act = mesh.active();
  f.resize_for(mesh);
  for (std::size_t s = 0; s < act.size(); ++s)
    for (int c = 0; c < f.comps; ++c)
      f.data[s * f.comps + c] =
          (c + 1) * (a + bx * mesh.center(act[s], 0) + by * mesh.center(act[s], 1));
}

}  // namespace

TEST_CASE("refinement reproduces linear fields at the child centers") {
  // Free flow: a globally linear field has a slope break at a periodic seam.
  ForestMesh mesh(unit_domain(8, 4, BoundaryKind::free_flow),
                  beta_measure(2.0, 5.0));
  SolutionField f;
  f.comps = 2;
  fill_linear(mesh, f, 0.3, -1.7, 0.9);

  RefinementPlan plan = empty_plan(mesh);
  const std::vector<CellId> act = mesh.active();
  for (std::size_t s = 0; s < act.size(); ++s)
    if (s % 3 == 0) plan.by_slot[s] = PlanEntry{Mark::refine, 0b11};
    else if (s % 3 == 1) plan.by_slot[s] = PlanEntry{Mark::refine, 0b01};
  mesh.enforce_constraints(plan);
  apply_plan(mesh, plan, f);

  const std::vector<CellId>& act1 = mesh.active();
  for (std::size_t s = 0; s < act1.size(); ++s) {
    const double want =
        0.3 - 1.7 * mesh.center(act1[s], 0) + 0.9 * mesh.center(act1[s], 1);
    CHECK(f.data[s * 2 + 0] == doctest::Approx(want).epsilon(1e-12).scale(1.0));
    CHECK(f.data[s * 2 + 1] ==
          doctest::Approx(2 * want).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("refinement conserves the integral of rough data") {
  ForestMesh mesh(unit_domain(8, 4, BoundaryKind::free_flow),
                  beta_measure(2.0, 5.0));
  testsup::Rng rng(17u);
  SolutionField f;
  f.comps = 3;
  f.resize_for(mesh);
  for (double& v : f.data) v = rng.uniform(-2.0, 2.0);

  double before[3];
  for (int c = 0; c < 3; ++c) before[c] = total_integral(mesh, f, c);

  RefinementPlan plan = empty_plan(mesh);
  for (std::size_t s = 0; s < plan.by_slot.size(); ++s)
    if (rng.uniform() < 0.5)
      plan.by_slot[s] =
          PlanEntry{Mark::refine, std::uint8_t(rng.uniform_int(1, 3))};
  mesh.enforce_constraints(plan);
  apply_plan(mesh, plan, f);

  for (int c = 0; c < 3; ++c)
    CHECK(total_integral(mesh, f, c) ==
          doctest::Approx(before[c]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("coarsening a refined group restores the parent average") {
  ForestMesh mesh(unit_domain(4, 4, BoundaryKind::free_flow),
                  beta_measure(2.0, 5.0));
  SolutionField f;
  f.comps = 1;
  fill_linear(mesh, f, 0.1, 0.7, -0.4);

  RefinementPlan plan = empty_plan(mesh);
  plan.by_slot[5] = PlanEntry{Mark::refine, 0b11};
  mesh.enforce_constraints(plan);
  apply_plan(mesh, plan, f);

  // Coarsen every child of the split cell back.
  RefinementPlan back = empty_plan(mesh);
  const std::vector<CellId> act = mesh.active();
  for (std::size_t s = 0; s < act.size(); ++s)
    if (mesh.node(act[s]).level[0] > 0) back.by_slot[s].mark = Mark::coarsen;
  mesh.enforce_constraints(back);
  TransferReport rep = apply_plan(mesh, back, f);
  CHECK(rep.coarsened == 1);

  const std::vector<CellId>& act1 = mesh.active();
  CHECK(act1.size() == 16);
  for (std::size_t s = 0; s < act1.size(); ++s) {
    const double want =
        0.1 + 0.7 * mesh.center(act1[s], 0) - 0.4 * mesh.center(act1[s], 1);
    CHECK(f.data[s] == doctest::Approx(want).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("random refine and coarsen round trips conserve to 1e-12") {
  ForestMesh mesh(unit_domain(6, 4), beta_measure(0.5, 0.5));
  testsup::Rng rng(99u);
  SolutionField f;
  f.comps = 1;
  f.resize_for(mesh);
  for (double& v : f.data) v = rng.uniform(-1.0, 1.0);
  const double before = total_integral(mesh, f, 0);

  for (int round = 0; round < 6; ++round) {
    RefinementPlan plan = empty_plan(mesh);
    const std::vector<CellId> act = mesh.active();
    for (std::size_t s = 0; s < act.size(); ++s) {
      const double r = rng.uniform();
      const CellNode& n = mesh.node(act[s]);
      if (r < 0.25 && std::max(n.level[0], n.level[1]) < 4)
        plan.by_slot[s] =
            PlanEntry{Mark::refine, std::uint8_t(rng.uniform_int(1, 3))};
      else if (r < 0.55 && n.parent != kInvalidCell)
        plan.by_slot[s].mark = Mark::coarsen;
    }
    mesh.enforce_constraints(plan);
    apply_plan(mesh, plan, f);
    CHECK(total_integral(mesh, f, 0) ==
          doctest::Approx(before).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("interpolated children stay near the parent average") {
  ForestMesh mesh(unit_domain(8, 4), uniform_measure());
  testsup::Rng rng(7u);
  SolutionField f;
  f.comps = 1;
  f.resize_for(mesh);
  for (double& v : f.data) v = rng.uniform(0.0, 1.0);
  const std::vector<CellId> act0 = mesh.active();
  const std::vector<double> old = f.data;

  // Each limited slope is bounded by the smaller one-sided jump over the
  // center distance, and a child center sits a quarter cell away, so the two
  // direction terms together stay below half the largest neighbor jump.
  std::vector<double> rad(act0.size(), 0.0);
  for (std::size_t s = 0; s < act0.size(); ++s) {
    double r = 0.0;
    for (int d = 0; d < 2; ++d)
      for (int side = -1; side <= 1; side += 2)
        for (CellId n : mesh.neighbors(act0[s], d, side))
          r = std::max(r, std::abs(old[std::size_t(mesh.node(n).slot)] - old[s]));
    rad[s] = 0.5 * r + 1e-14;
  }

  RefinementPlan plan = empty_plan(mesh);
  for (std::size_t s = 0; s < plan.by_slot.size(); ++s)
    plan.by_slot[s] = PlanEntry{Mark::refine, 0b11};
  mesh.enforce_constraints(plan);
  apply_plan(mesh, plan, f);

  std::unordered_map<CellId, std::size_t> idx0;
  for (std::size_t s = 0; s < act0.size(); ++s) idx0.emplace(act0[s], s);
  const std::vector<CellId>& act1 = mesh.active();
  for (std::size_t s = 0; s < act1.size(); ++s) {
    auto it = idx0.find(mesh.node(act1[s]).parent);
    REQUIRE(it != idx0.end());
    CHECK(std::abs(f.data[s] - old[it->second]) <= rad[it->second]);
  }
}

TEST_CASE("apply_plan rejects a stale plan") {
  ForestMesh mesh(unit_domain(4, 4), uniform_measure());
  SolutionField f;
  f.comps = 1;
  f.resize_for(mesh);
  RefinementPlan plan;
  plan.by_slot.assign(3, PlanEntry{});
  CHECK_THROWS_AS(apply_plan(mesh, plan, f), std::logic_error);
}
