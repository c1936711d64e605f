#pragma once

#include <cstdint>
#include <vector>

#include "sfv/sfv_rhs.hpp"
#include "sfv/transfer.hpp"

namespace sfv {

struct AdaptParams {
  ReconKind high = ReconKind::weno5;
  ReconKind low = ReconKind::weno3;
  Limiter lim = Limiter::minmod;
  double eps_per_dt = 1e-4;    // accepted indicator budget per unit time
  double c_ref = 1.0;
  double coarsen_frac = 0.1;   // coarsen below this fraction of the budget
  double eps_aniso = 0.25;     // bulk share a direction needs to be split
  int max_level = 10;
  int max_iter = 8;
  int quad_pts = 6;
};

// Caches tied to one mesh version, reusable across steps.  After a call that
// leaves stage1_valid set, stage1 holds the high-order rhs of the current
// field on the current mesh and can seed the next time step.
struct AdaptContext {
  PatchGeometry geo;
  FaceQuadCache fq;
  RhsWorkspace ws;
  SolutionField low_rhs;
  StageRhs stage1;
  bool stage1_valid = false;

  void refresh(const ForestMesh& mesh, int quad_pts);
};

struct AdaptReport {
  int iterations = 0;
  int refined = 0;
  int coarsened = 0;
  double max_eta = 0.0;
  std::size_t ndofs = 0;
};

// Measure-weighted indicator per active cell: the gap between one forward
// Euler stage under the high and the low reconstruction, scaled by the cell
// measure.  Fills the context caches and leaves stage1 valid.
void error_indicator(const ForestMesh& mesh, const ConservationLaw& law,
                     const AdaptParams& params, const SolutionField& u,
                     double dt, AdaptContext& ctx, std::vector<double>& eta);

// Refines until every cell meets the indicator budget (bounded number of
// sweeps), then coarsens cells far below it.  Field and mesh move together
// conservatively.  Direction choice per refined cell follows the per
// direction smoothness share of its stencil window.
AdaptReport adapt_mesh(ForestMesh& mesh, const ConservationLaw& law,
                       const AdaptParams& params, SolutionField& u, double dt,
                       AdaptContext& ctx);

}  // namespace sfv
