#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "sfv/sfv_rhs.hpp"
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

// Refines a random closed selection so stencils cross level jumps.
void roughen(ForestMesh& mesh, testsup::Rng& rng, int rounds = 2) {
  for (int round = 0; round < rounds; ++round) {
    RefinementPlan plan;
    plan.by_slot.assign(mesh.n_active(), PlanEntry{});
    for (std::size_t s = 0; s < plan.by_slot.size(); ++s)
      if (rng.uniform() < 0.3)
        plan.by_slot[s] =
            PlanEntry{Mark::refine, std::uint8_t(rng.uniform_int(1, 3))};
    mesh.enforce_constraints(plan);
    const std::vector<CellId> act = mesh.active();
    for (std::size_t s = 0; s < act.size(); ++s)
      if (plan.by_slot[s].mark == Mark::refine)
        mesh.refine_cell(act[s], plan.by_slot[s].dirs);
  }
}

template <typename F>
void fill_from_centers(const ForestMesh& mesh, SolutionField& u, int comps,
                       F&& f) {
  const std::vector<CellId>& act = mesh.active();
  u.comps = comps;
  u.resize_for(mesh);
  for (std::size_t s = 0; s < act.size(); ++s) {
    State st = f(mesh.center(act[s], 0), mesh.center(act[s], 1));
    for (int c = 0; c < comps; ++c) u.data[s * comps + c] = st[c];
  }
}

State prim_to_cons(double gamma, double rho, double v, double p) {
  return State{rho, rho * v, p / (gamma - 1.0) + 0.5 * rho * v * v};
}

struct Assembled {
  PatchGeometry geo;
  FaceQuadCache fq;
  RhsWorkspace ws;
};

RhsResult rhs_of(const ForestMesh& mesh, const ConservationLaw& law,
                 const SolutionField& u, SolutionField& rhs, Assembled& a,
                 ReconKind kind = ReconKind::weno5) {
  build_patch_geometry(mesh, a.geo);
  a.fq.build(mesh);
  return compute_rhs(mesh, a.geo, a.fq, law, kind, Limiter::minmod, u, rhs,
                     a.ws);
}

}  // namespace

TEST_CASE("stable step size matches the advection bound") {
  ForestMesh mesh(unit_domain(16, 16), uniform_measure());
  SolutionField u;
  fill_from_centers(mesh, u, 1, [](double, double) { return State{1.0, 0, 0}; });
  const ConservationLaw law = make_advection(1.0);
  CHECK(compute_dt(mesh, law, u, 0.4, 1e9) == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(compute_dt(mesh, law, u, 0.4, 0.01) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(compute_dt(mesh, make_advection(0.0), u, 0.4, 7.0) == 7.0);
}

TEST_CASE("constant states are exact equilibria") {
  testsup::Rng rng(31u);
  for (BoundaryKind bc : {BoundaryKind::periodic, BoundaryKind::free_flow}) {
    ForestMesh mesh(unit_domain(8, 4, bc), beta_measure(2.0, 5.0));
    roughen(mesh, rng);
    SolutionField u;
    fill_from_centers(mesh, u, 1,
                      [](double, double) { return State{0.7, 0, 0}; });
    SolutionField rhs;
    Assembled a;
    const RhsResult res = rhs_of(mesh, make_burgers(), u, rhs, a);
    for (double v : rhs.data) CHECK(std::abs(v) < 1e-12);
    CHECK(std::abs(res.boundary_net[0]) < 1e-13);
  }
}

TEST_CASE("interior face integrals telescope to machine zero") {
  testsup::Rng rng(32u);
  ForestMesh mesh(unit_domain(8, 4), beta_measure(2.0, 5.0));
  roughen(mesh, rng);
  SolutionField u;
  fill_from_centers(mesh, u, 1, [&](double, double) {
    return State{rng.uniform(-1.0, 1.0), 0, 0};
  });
  SolutionField rhs;
  Assembled a;
  rhs_of(mesh, make_burgers(), u, rhs, a);
  CHECK(std::abs(total_integral(mesh, rhs, 0)) < 1e-12);
}

TEST_CASE("open boundaries account for the full imbalance") {
  testsup::Rng rng(33u);
  ForestMesh mesh(unit_domain(8, 4, BoundaryKind::free_flow),
                  beta_measure(2.0, 5.0));
  roughen(mesh, rng);
  const ConservationLaw law = make_euler(1.4);
  SolutionField u;
  fill_from_centers(mesh, u, 3, [](double x, double y) {
    return prim_to_cons(1.4, 1.0 + 0.2 * std::sin(6.28 * x) + 0.1 * y,
                        0.3 * std::cos(6.28 * x), 1.0 + 0.1 * x);
  });
  SolutionField rhs;
  Assembled a;
  const RhsResult res = rhs_of(mesh, law, u, rhs, a);
  for (int c = 0; c < 3; ++c)
    CHECK(total_integral(mesh, rhs, c) ==
          doctest::Approx(-res.boundary_net[c]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("cached parallel and direct serial assemblies agree") {
  testsup::Rng rng(34u);
  ForestMesh mesh(unit_domain(6, 4, BoundaryKind::free_flow),
                  beta_measure(2.0, 5.0));
  roughen(mesh, rng);
  const ConservationLaw law = make_euler(1.4);
  SolutionField u;
  fill_from_centers(mesh, u, 3, [](double x, double y) {
    return prim_to_cons(1.4, 1.2 + 0.3 * std::sin(5.0 * x + y),
                        0.4 * std::cos(3.0 * x), 0.9 + 0.2 * y);
  });
  SolutionField rhs, ref;
  Assembled a;
  const RhsResult res = rhs_of(mesh, law, u, rhs, a);
  const RhsResult rres = compute_rhs_reference(mesh, law, ReconKind::weno5,
                                               Limiter::minmod, u, ref);
  REQUIRE(rhs.data.size() == ref.data.size());
  for (std::size_t i = 0; i < rhs.data.size(); ++i)
    CHECK(rhs.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12).scale(1.0));
  for (int c = 0; c < 3; ++c)
    CHECK(res.boundary_net[c] ==
          doctest::Approx(rres.boundary_net[c]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("linear profiles advect at the exact rate away from walls") {
  testsup::Rng rng(35u);
  ForestMesh mesh(unit_domain(8, 4, BoundaryKind::free_flow),
                  beta_measure(2.0, 5.0));
  roughen(mesh, rng, 1);
  SolutionField u;
  fill_from_centers(mesh, u, 1,
                    [](double x, double) { return State{x, 0, 0}; });
  SolutionField rhs;
  Assembled a;
  const RhsResult res = rhs_of(mesh, make_advection(1.0), u, rhs, a);
  const std::vector<CellId>& act = mesh.active();
  for (std::size_t s = 0; s < act.size(); ++s) {
    Box b = mesh.box(act[s]);
    // The upwind trace of the lo face comes from the cell one column left,
    // so stay far enough in that its window is ghost free as well.
    if (b.lo[0] < 0.375 || b.hi[0] > 0.75) continue;
    CHECK(rhs.data[s] == doctest::Approx(-1.0).epsilon(1e-11));
  }
  // The imbalance bookkeeping holds on the whole domain regardless.
  CHECK(total_integral(mesh, rhs, 0) ==
        doctest::Approx(-res.boundary_net[0]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("a full step moves the total by exactly the boundary flow") {
  ForestMesh mesh(unit_domain(16, 4, BoundaryKind::free_flow),
                  beta_measure(2.0, 5.0));
  SolutionField u;
  fill_from_centers(mesh, u, 1, [](double x, double y) {
    return State{1.0 + 0.5 * std::sin(6.28318 * x) * (1.0 + 0.3 * y), 0, 0};
  });
  const ConservationLaw law = make_advection(1.0);
  const double before = total_integral(mesh, u, 0);

  PatchGeometry geo;
  build_patch_geometry(mesh, geo);
  FaceQuadCache fq;
  fq.build(mesh);
  RhsWorkspace ws;
  StepAudit audit;
  const double dt = compute_dt(mesh, law, u, 0.4, 1e9);
  for (int k = 0; k < 3; ++k)
    ssp_rk3_step(mesh, geo, fq, law, ReconKind::weno5, Limiter::minmod, u, dt,
                 ws, &audit);
  CHECK(total_integral(mesh, u, 0) ==
        doctest::Approx(before - audit.boundary[0]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("periodic steps conserve the total exactly") {
  ForestMesh mesh(unit_domain(16, 4), beta_measure(2.0, 5.0));
  SolutionField u;
  fill_from_centers(mesh, u, 1, [](double x, double y) {
    return State{0.2 + 0.1 * std::sin(6.28318 * x) + 0.05 * y, 0, 0};
  });
  const ConservationLaw law = make_burgers();
  const double before = total_integral(mesh, u, 0);

  PatchGeometry geo;
  build_patch_geometry(mesh, geo);
  FaceQuadCache fq;
  fq.build(mesh);
  RhsWorkspace ws;
  StepAudit audit;
  for (int k = 0; k < 4; ++k) {
    const double dt = compute_dt(mesh, law, u, 0.4, 1e9);
    ssp_rk3_step(mesh, geo, fq, law, ReconKind::weno5, Limiter::minmod, u, dt,
                 ws, &audit);
  }
  CHECK(total_integral(mesh, u, 0) ==
        doctest::Approx(before).epsilon(1e-13).scale(1.0));
  CHECK(std::abs(audit.boundary[0]) < 1e-14);
}

TEST_CASE("reusing a precomputed first stage reproduces the step") {
  ForestMesh mesh(unit_domain(8, 4), uniform_measure());
  SolutionField u;
  fill_from_centers(mesh, u, 1, [](double x, double y) {
    return State{0.3 + 0.2 * std::sin(6.28318 * x) * y, 0, 0};
  });
  const ConservationLaw law = make_burgers();
  PatchGeometry geo;
  build_patch_geometry(mesh, geo);
  FaceQuadCache fq;
  fq.build(mesh);
  RhsWorkspace ws;
  const double dt = compute_dt(mesh, law, u, 0.4, 1e9);

  StageRhs stage;
  stage.res = compute_rhs(mesh, geo, fq, law, ReconKind::weno5,
                          Limiter::minmod, u, stage.rhs, ws);
  SolutionField ua = u, ub = u;
  StepAudit aa, ab;
  ssp_rk3_step(mesh, geo, fq, law, ReconKind::weno5, Limiter::minmod, ua, dt,
               ws, &aa);
  ssp_rk3_step(mesh, geo, fq, law, ReconKind::weno5, Limiter::minmod, ub, dt,
               ws, &ab, &stage);
  REQUIRE(ua.data.size() == ub.data.size());
  for (std::size_t i = 0; i < ua.data.size(); ++i)
    CHECK(ua.data[i] == ub.data[i]);
  CHECK(aa.boundary[0] == ab.boundary[0]);
}

TEST_CASE("oversized steps on diverging flow abort with positivity") {
  ForestMesh mesh(unit_domain(8, 4, BoundaryKind::free_flow),
                  uniform_measure());
  const ConservationLaw law = make_euler(1.4);
  SolutionField u;
  fill_from_centers(mesh, u, 3, [](double x, double) {
    return prim_to_cons(1.4, 1.0, x < 0.5 ? -10.0 : 10.0, 1.0);
  });
  PatchGeometry geo;
  build_patch_geometry(mesh, geo);
  FaceQuadCache fq;
  fq.build(mesh);
  RhsWorkspace ws;
  CHECK_THROWS_AS(ssp_rk3_step(mesh, geo, fq, law, ReconKind::weno5,
                               Limiter::minmod, u, 0.5, ws),
                  PositivityError);
}
