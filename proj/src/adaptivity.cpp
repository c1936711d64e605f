#include "sfv/adaptivity.hpp"

#include <algorithm>
#include <cmath>

namespace sfv {

namespace {

// Per-direction smoothness of the central value triple of the cell's stencil
// window, taken from the patch averages.  Windows narrower than three cells
// carry no directional signal.
double direction_beta(const PatchGeometry& geo, const PatchValues& vals,
                      std::size_t slot, int dir, int comps) {
  const int nd = geo.ndim;
  const std::size_t wi = slot * std::size_t(nd);
  const int n = geo.wn[wi + std::size_t(dir)];
  if (n < 3) return 0.0;
  const int tc = std::clamp(int(geo.wt[wi + std::size_t(dir)]), 1, n - 2);
  int stride = 1, base = 0;
  for (int d = 0, mul = 1; d < nd; ++d, mul *= 5) {
    if (d == dir)
      stride = mul;
    else
      base += geo.wt[wi + std::size_t(d)] * mul;
  }
  double worst = 0.0;
  for (int c = 0; c < comps; ++c) {
    const std::size_t at = (slot * std::size_t(geo.npatch)) * comps;
    const double vm =
        vals.avg[at + std::size_t(base + (tc - 1) * stride) * comps + c];
    const double v0 =
        vals.avg[at + std::size_t(base + tc * stride) * comps + c];
    const double vp =
        vals.avg[at + std::size_t(base + (tc + 1) * stride) * comps + c];
    worst = std::max(worst, smoothness_beta(vm, v0, vp));
  }
  return worst;
}

}  // namespace

void AdaptContext::refresh(const ForestMesh& mesh, int quad_pts) {
  if (geo.mesh_version != mesh.version()) build_patch_geometry(mesh, geo);
  if (fq.mesh_version != mesh.version()) fq.build(mesh, quad_pts);
}

void error_indicator(const ForestMesh& mesh, const ConservationLaw& law,
                     const AdaptParams& params, const SolutionField& u,
                     double dt, AdaptContext& ctx, std::vector<double>& eta) {
  ctx.refresh(mesh, params.quad_pts);
  ctx.stage1.res = compute_rhs(mesh, ctx.geo, ctx.fq, law, params.high,
                               params.lim, u, ctx.stage1.rhs, ctx.ws);
  ctx.stage1_valid = true;
  // Patch averages do not depend on the blend order, so the low pass reuses
  // the fill and ctx.ws.vals stays loaded for the direction choice below.
  compute_rhs(mesh, ctx.geo, ctx.fq, law, params.low, params.lim, u,
              ctx.low_rhs, ctx.ws, true);

  const std::vector<CellId>& act = mesh.active();
  const int comps = law.components;
  eta.assign(act.size(), 0.0);
  for (std::size_t s = 0; s < act.size(); ++s) {
    double gap = 0.0;
    for (int c = 0; c < comps; ++c)
      gap = std::max(gap, std::abs(ctx.stage1.rhs.data[s * comps + c] -
                                   ctx.low_rhs.data[s * comps + c]));
    eta[s] = params.c_ref * mesh.cell_volume(act[s]) * dt * gap;
  }
}

AdaptReport adapt_mesh(ForestMesh& mesh, const ConservationLaw& law,
                       const AdaptParams& params, SolutionField& u, double dt,
                       AdaptContext& ctx) {
  AdaptReport rep;
  const double eps = params.eps_per_dt * dt;
  const int nd = mesh.domain().ndim();
  std::vector<double> eta;

  for (int iter = 0; iter < params.max_iter; ++iter) {
    error_indicator(mesh, law, params, u, dt, ctx, eta);
    rep.iterations = iter + 1;
    rep.max_eta = *std::max_element(eta.begin(), eta.end());

    const std::vector<CellId>& act = mesh.active();
    RefinementPlan plan;
    plan.by_slot.assign(act.size(), PlanEntry{});
    int marked = 0;
    for (std::size_t s = 0; s < act.size(); ++s) {
      if (!(eta[s] > eps)) continue;
      double beta[kMaxDim] = {0, 0, 0, 0};
      double total = 0.0;
      for (int d = 0; d < nd; ++d) {
        beta[d] = direction_beta(ctx.geo, ctx.ws.vals, s, d, law.components);
        total += beta[d];
      }
      // A nonpositive share threshold disables the anisotropy test entirely
      // and splits every admissible direction (isotropic baseline).
      std::uint8_t dirs = 0;
      for (int d = 0; d < nd; ++d) {
        const bool wanted = params.eps_aniso <= 0.0 ||
                            (total > 0.0 ? beta[d] > params.eps_aniso * total
                                         : true);
        if (wanted && mesh.node(act[s]).level[d] < params.max_level)
          dirs |= std::uint8_t(1u << d);
      }
      if (dirs == 0) continue;
      plan.by_slot[s] = PlanEntry{Mark::refine, dirs};
      ++marked;
    }
    if (marked == 0) break;
    mesh.enforce_constraints(plan);
    const TransferReport tr = apply_plan(mesh, plan, u, params.lim);
    rep.refined += tr.refined;
    ctx.stage1_valid = false;
  }

  // Coarsening reuses the last accepted indicator so the mesh it marked is
  // the mesh it edits.
  {
    const std::vector<CellId>& act = mesh.active();
    if (eta.size() == act.size()) {
      RefinementPlan plan;
      plan.by_slot.assign(act.size(), PlanEntry{});
      int marked = 0;
      for (std::size_t s = 0; s < act.size(); ++s) {
        if (mesh.node(act[s]).parent == kInvalidCell) continue;
        if (eta[s] < params.coarsen_frac * eps) {
          plan.by_slot[s].mark = Mark::coarsen;
          ++marked;
        }
      }
      if (marked > 0) {
        mesh.enforce_constraints(plan);
        const TransferReport tr = apply_plan(mesh, plan, u, params.lim);
        rep.coarsened += tr.coarsened;
        if (tr.coarsened > 0) ctx.stage1_valid = false;
      }
    }
  }

  if (!ctx.stage1_valid) {
    ctx.refresh(mesh, params.quad_pts);
    ctx.stage1.res = compute_rhs(mesh, ctx.geo, ctx.fq, law, params.high,
                                 params.lim, u, ctx.stage1.rhs, ctx.ws);
    ctx.stage1_valid = true;
  }
  rep.ndofs = mesh.n_active();
  return rep;
}

}  // namespace sfv
