#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "sfv/forest_mesh.hpp"
#include "sfv/reconstruction.hpp"
#include "test_support.hpp"

using namespace sfv;

namespace {

DomainSpec unit_domain(int nx, int ny, BoundaryKind bc = BoundaryKind::periodic) {
  DomainSpec d;
  d.n_physical = 1;
  d.n_stochastic = 1;
  d.lo = {0.0, 0.0, 0.0, 0.0};
  d.hi = {1.0, 1.0, 0.0, 0.0};
  d.root_cells = {nx, ny, 1, 1};
  d.boundary[0] = bc;
  return d;
}

ProductMeasure uniform_measure() {
  ProductMeasure m;
  m.factors.push_back(make_uniform(0.0, 1.0));
  return m;
}

// Average of sin(2 pi s) over [a, b].
double sin_avg(double a, double b) {
  return (std::cos(2 * M_PI * a) - std::cos(2 * M_PI * b)) / (2 * M_PI * (b - a));
}

// Integral of the blended polynomial over the target cell divided by width.
double line_cell_average(const LineRecon& lr) {
  double acc = 0.0;
  double p = 1.0;  // integral of zeta^k over [-1/2,1/2]
  for (int k = 0; k <= lr.deg; ++k) {
    double mom = (k % 2 == 0) ? std::ldexp(1.0, -k) / double(k + 1) : 0.0;
    acc += lr.coeff[k] * mom;
    p *= 1.0;
  }
  return acc;
}

}  // namespace

TEST_CASE("smoothness indicator hand values") {
  CHECK(smoothness_beta(1, 1, 1) == doctest::Approx(0.0).scale(1.0));
  CHECK(smoothness_beta(0, 1, 2) == doctest::Approx(1.0));
  CHECK(smoothness_beta(0, 1, 0) == doctest::Approx(13.0 / 3.0));
  CHECK(smoothness_beta(2, 1, 0) == doctest::Approx(1.0));  // symmetric
}

TEST_CASE("limiters") {
  CHECK(apply_limiter(Limiter::minmod, 1.0, 2.0) == 1.0);
  CHECK(apply_limiter(Limiter::minmod, -2.0, -0.5) == -0.5);
  CHECK(apply_limiter(Limiter::minmod, 1.0, -1.0) == 0.0);
  CHECK(apply_limiter(Limiter::minmod, 0.0, 3.0) == 0.0);
  CHECK(apply_limiter(Limiter::van_leer, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(apply_limiter(Limiter::van_leer, 1.0, 3.0) == doctest::Approx(1.5));
  CHECK(apply_limiter(Limiter::van_leer, -1.0, 2.0) == 0.0);
}

TEST_CASE("1-D kernel reproduces linear data exactly on uneven windows") {
  testsup::Rng rng(7u);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 3 + int(rng.uniform_int(0, 2));
    double edges[6];
    edges[0] = rng.uniform(-1.0, 0.0);
    for (int j = 0; j < n; ++j)
      edges[j + 1] = edges[j] + rng.uniform(0.2, 1.7);
    double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
    double avg[5];
    for (int j = 0; j < n; ++j)
      avg[j] = a + b * 0.5 * (edges[j] + edges[j + 1]);
    for (int t = 0; t < n; ++t) {
      for (ReconKind kind : {ReconKind::weno3, ReconKind::weno5}) {
        LineRecon lr;
        build_line(kind, n, t, edges, avg, lr);
        for (int p = 0; p < 4; ++p) {
          double xi = rng.uniform(edges[t], edges[t + 1]);
          CHECK(lr.eval(xi) ==
                doctest::Approx(a + b * xi).epsilon(1e-12).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("1-D kernel conserves the target average for any data") {
  testsup::Rng rng(99u);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 1 + int(rng.uniform_int(0, 4));
    double edges[6];
    edges[0] = 0.0;
    for (int j = 0; j < n; ++j) edges[j + 1] = edges[j] + rng.uniform(0.1, 2.0);
    double avg[5];
    for (int j = 0; j < n; ++j) avg[j] = rng.uniform(-5.0, 5.0);
    int t = int(rng.uniform_int(0, n - 1));
    for (ReconKind kind : {ReconKind::p0, ReconKind::weno3, ReconKind::weno5}) {
      LineRecon lr;
      build_line(kind, n, t, edges, avg, lr);
      CHECK(line_cell_average(lr) ==
            doctest::Approx(avg[t]).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("1-D kernel is essentially non-oscillatory across a step") {
  // Centered windows on either side of a jump: the reconstruction must hug
  // its own plateau because one clean substencil survives.
  double edges[6] = {0, 1, 2, 3, 4, 5};
  double lo_side[5] = {0, 0, 0, 1, 1};
  double hi_side[5] = {0, 0, 1, 1, 1};
  LineRecon lr;
  build_line(ReconKind::weno5, 5, 2, edges, lo_side, lr);
  for (double xi : {2.0, 2.25, 2.5, 2.75, 3.0})
    CHECK(std::abs(lr.eval(xi)) < 1e-6);
  build_line(ReconKind::weno5, 5, 2, edges, hi_side, lr);
  for (double xi : {2.0, 2.5, 3.0})
    CHECK(std::abs(lr.eval(xi) - 1.0) < 1e-6);
}

TEST_CASE("1-D kernel order on smooth data, including cell centers") {
  // Small amplitude keeps the weights in their smooth regime; the error at
  // interior points and at the exact center must shrink at high order.
  std::vector<double> hs, err5, err3;
  for (int nc : {16, 32, 64, 128}) {
    double h = 1.0 / nc;
    double maxe5 = 0.0, maxe3 = 0.0;
    for (int i = 2; i < nc - 2; i += 3) {
      double edges[6], avg[5];
      for (int j = 0; j <= 5; ++j) edges[j] = (i - 2 + j) * h;
      for (int j = 0; j < 5; ++j)
        avg[j] = 1e-3 * sin_avg(edges[j], edges[j + 1]);
      LineRecon lr5, lr3;
      build_line(ReconKind::weno5, 5, 2, edges, avg, lr5);
      build_line(ReconKind::weno3, 5, 2, edges, avg, lr3);
      for (double frac : {0.0, 0.31, 0.5, 0.77, 1.0}) {
        double xi = edges[2] + frac * h;
        double exact = 1e-3 * std::sin(2 * M_PI * xi);
        maxe5 = std::max(maxe5, std::abs(lr5.eval(xi) - exact));
        maxe3 = std::max(maxe3, std::abs(lr3.eval(xi) - exact));
      }
    }
    hs.push_back(h);
    err5.push_back(maxe5);
    err3.push_back(maxe3);
  }
  CHECK(testsup::fit_slope(hs, err5) >= 3.5);
  CHECK(testsup::fit_slope(hs, err3) >= 2.5);
}

TEST_CASE("mesh reconstruction is exact for linear fields") {
  // Free-flow in x; probe away from the boundary so no extrapolation window
  // is involved.  Uniform measure makes the CDF coordinate linear too.
  ForestMesh mesh(unit_domain(8, 6, BoundaryKind::free_flow), uniform_measure());
  // Refine an interior block, with closure keeping the mesh legal.
  RefinementPlan plan;
  plan.by_slot.assign(std::size_t(mesh.n_active()), PlanEntry{});
  for (CellId c : mesh.active()) {
    double xc = mesh.center(c, 0);
    if (xc > 0.37 && xc < 0.63)
      plan.by_slot[std::size_t(mesh.node(c).slot)] =
          PlanEntry{Mark::refine, std::uint8_t((mesh.node(c).slot % 2) ? 0b11 : 0b01)};
  }
  mesh.enforce_constraints(plan);
  {
    auto act = mesh.active();
    for (std::size_t s = 0; s < act.size(); ++s)
      if (plan.by_slot[s].mark == Mark::refine)
        mesh.refine_cell(act[s], plan.by_slot[s].dirs);
  }

  auto lin = [](double x, double y) { return 0.3 - 1.7 * x + 0.9 * y; };
  auto act = mesh.active();
  std::vector<double> field(act.size());
  for (std::size_t s = 0; s < act.size(); ++s)
    field[s] = lin(mesh.center(act[s], 0), mesh.center(act[s], 1));

  PatchGeometry geo;
  build_patch_geometry(mesh, geo);
  PatchValues vals;
  fill_patch_values(mesh, geo, field.data(), 1, Limiter::minmod, vals);

  testsup::Rng rng(5u);
  for (std::size_t s = 0; s < act.size(); ++s) {
    Box b = mesh.box(act[s]);
    if (b.lo[0] < 0.25 || b.hi[0] > 0.75) continue;
    for (int trial = 0; trial < 3; ++trial) {
      double x = rng.uniform(b.lo[0], b.hi[0]);
      double y = rng.uniform(b.lo[1], b.hi[1]);
      double xi[2] = {x, y};  // uniform measure: CDF(y) == y
      double out;
      for (ReconKind kind : {ReconKind::weno3, ReconKind::weno5}) {
        reconstruct_point(mesh, geo, vals, mesh.node(act[s]).slot, kind, xi, &out);
        CHECK(out == doctest::Approx(lin(x, y)).epsilon(1e-11).scale(1.0));
        reconstruct_point_direct(mesh, field.data(), 1, Limiter::minmod, act[s],
                                 kind, xi, &out);
        CHECK(out == doctest::Approx(lin(x, y)).epsilon(1e-11).scale(1.0));
      }
    }
  }
}

TEST_CASE("cached and direct point reconstruction agree everywhere") {
  ForestMesh mesh(unit_domain(6, 4), uniform_measure());
  testsup::Rng rng(123u);
  // A couple of closed random refinement rounds.
  for (int round = 0; round < 2; ++round) {
    RefinementPlan plan;
    plan.by_slot.assign(std::size_t(mesh.n_active()), PlanEntry{});
    for (auto& e : plan.by_slot)
      if (rng.uniform() < 0.3)
        e = PlanEntry{Mark::refine, std::uint8_t(1 + rng.uniform_int(0, 2))};
    mesh.enforce_constraints(plan);
    auto act = mesh.active();
    for (std::size_t s = 0; s < act.size(); ++s)
      if (plan.by_slot[s].mark == Mark::refine)
        mesh.refine_cell(act[s], plan.by_slot[s].dirs);
  }

  auto act = mesh.active();
  const int comps = 2;
  std::vector<double> field(act.size() * comps);
  for (double& v : field) v = rng.uniform(-1.0, 1.0);

  PatchGeometry geo;
  build_patch_geometry(mesh, geo);
  PatchValues vals;
  fill_patch_values(mesh, geo, field.data(), comps, Limiter::minmod, vals);

  for (std::size_t s = 0; s < act.size(); s += 3) {
    Box b = mesh.box(act[s]);
    double x = rng.uniform(b.lo[0], b.hi[0]);
    double y = rng.uniform(b.lo[1], b.hi[1]);
    double xi[2] = {x, y};
    double got[2], want[2];
    for (ReconKind kind : {ReconKind::p0, ReconKind::weno3, ReconKind::weno5}) {
      reconstruct_point(mesh, geo, vals, mesh.node(act[s]).slot, kind, xi, got);
      reconstruct_point_direct(mesh, field.data(), comps, Limiter::minmod,
                               act[s], kind, xi, want);
      for (int c = 0; c < comps; ++c)
        CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("2-D reconstruction order on smooth periodic data") {
  std::vector<double> hs, errs;
  for (int nc : {8, 16, 32, 64}) {
    ForestMesh mesh(unit_domain(nc, nc), uniform_measure());
    auto act = mesh.active();
    std::vector<double> field(act.size());
    for (std::size_t s = 0; s < act.size(); ++s) {
      Box b = mesh.box(act[s]);
      field[s] =
          1e-3 * sin_avg(b.lo[0], b.hi[0]) * sin_avg(b.lo[1], b.hi[1]);
    }
    PatchGeometry geo;
    build_patch_geometry(mesh, geo);
    PatchValues vals;
    fill_patch_values(mesh, geo, field.data(), 1, Limiter::minmod, vals);
    double maxe = 0.0;
    testsup::Rng rng(31u);
    for (std::size_t s = 0; s < act.size(); s += 7) {
      Box b = mesh.box(act[s]);
      for (int trial = 0; trial < 2; ++trial) {
        double x = rng.uniform(b.lo[0], b.hi[0]);
        double y = rng.uniform(b.lo[1], b.hi[1]);
        double xi[2] = {x, y};
        double out;
        reconstruct_point(mesh, geo, vals, mesh.node(act[s]).slot,
                          ReconKind::weno5, xi, &out);
        double exact = 1e-3 * std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y);
        maxe = std::max(maxe, std::abs(out - exact));
      }
    }
    hs.push_back(1.0 / nc);
    errs.push_back(maxe);
  }
  CHECK(testsup::fit_slope(hs, errs) >= 3.5);
}

TEST_CASE("stochastic reconstruction converges in the mass coordinate") {
  // Nonuniform beta slabs: reconstruct u(y) = y^2 at slab conditional means
  // on successively refined stochastic meshes.
  ProductMeasure pm;
  pm.factors.push_back(make_beta(2.0, 5.0));
  double prev = 1e100;
  for (int level = 2; level <= 5; ++level) {
    DomainSpec d = unit_domain(2, 1 << level);
    ForestMesh mesh(d, pm);
    auto act = mesh.active();
    std::vector<double> field(act.size());
    for (std::size_t s = 0; s < act.size(); ++s) {
      // Cell average of y^2 under the conditional measure, by quadrature.
      Box b = mesh.box(act[s]);
      auto r = quadrature(pm.factors[0], b.lo[1], b.hi[1], 8);
      double acc = 0.0, wsum = 0.0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        acc += r.weights[i] * r.nodes[i] * r.nodes[i];
        wsum += r.weights[i];
      }
      field[s] = acc / wsum;
    }
    PatchGeometry geo;
    build_patch_geometry(mesh, geo);
    PatchValues vals;
    fill_patch_values(mesh, geo, field.data(), 1, Limiter::minmod, vals);
    // The map from mass coordinate to y loses smoothness at the measure's
    // thin right tail (the density vanishes there); judge the interior.
    double maxe = 0.0;
    for (std::size_t s = 0; s < act.size(); ++s) {
      if (mesh.cdf_hi(act[s], 1) > 0.9) continue;
      double y = mesh.center(act[s], 1);
      double xi[2] = {mesh.center(act[s], 0), cdf(pm.factors[0], y)};
      double out;
      reconstruct_point(mesh, geo, vals, mesh.node(act[s]).slot,
                        ReconKind::weno5, xi, &out);
      maxe = std::max(maxe, std::abs(out - y * y));
    }
    CHECK(maxe < prev * 0.6);
    prev = maxe;
  }
  CHECK(prev < 3e-6);
}
