#pragma once

#include <cstdint>
#include <vector>

#include "sfv/forest_mesh.hpp"
#include "sfv/physics.hpp"

namespace sfv {

enum class ReconKind { p0, weno3, weno5 };
int recon_order(ReconKind k);  // formal order: 1, 3, 5

// Central smoothness indicator of three consecutive averages (the quadratic
// ENO form); used by the refinement direction selector.
double smoothness_beta(double um, double u0, double up);

enum class Limiter { minmod, van_leer };
double apply_limiter(Limiter lim, double s_minus, double s_plus);

// ---------------------------------------------------------------------------
// 1-D reconstruction kernel.
//
// Works on a window of n <= 5 consecutive cells in a "working" coordinate:
// physical length in physical directions, cumulative probability in
// stochastic directions (where cell width equals slab mass and measure-
// weighted averages become plain averages).  Candidate polynomials are the
// classic substencil fits plus one full-window central candidate, combined
// with Jiang-Shu nonlinear weights; the blend conserves the target average
// for any weights and evaluates with high order anywhere in the cell.
// ---------------------------------------------------------------------------

// Geometry-only candidate structure: maps window averages to polynomial
// coefficients in the local coordinate zeta = (xi - target mid)/target width.
// Scale-invariant, so one table serves every uniformly spaced window.
struct CandGeom {
  int n = 0, t = 0;        // window size, target cell index
  int ncand = 0;           // laterals first, central candidate last
  int sub[4] = {0, 0, 0, 0};   // first window cell of each candidate
  int len[4] = {0, 0, 0, 0};   // cells (= coefficients) of each candidate
  double gamma[4] = {0, 0, 0, 0};
  double mat[4][25];       // candidate k: row-major len[k] x len[k] map
};

// Build candidates for arbitrary window edges (n+1 ascending working
// coordinates).  kind selects the window family (weno5: full window, weno3:
// the inner 3-cell window around the target, p0: constant).
void build_candidates(ReconKind kind, int n, int t, const double* edges,
                      CandGeom& cg);

// Shared tables for uniformly spaced windows.
const CandGeom& uniform_candidates(ReconKind kind, int n, int t);

// A built reconstruction: one conservative polynomial on the target cell.
struct LineRecon {
  int deg = 0;
  double zmid = 0.0, zwidth = 1.0;
  double coeff[5] = {0, 0, 0, 0, 0};

  double eval(double xi) const {
    double z = (xi - zmid) / zwidth;
    double v = coeff[deg];
    for (int i = deg - 1; i >= 0; --i) v = v * z + coeff[i];
    return v;
  }
};

// Blend the candidates for one set of window averages.  zmid/zwidth define
// the target cell in the working coordinate (its midpoint and width).
void build_line(const CandGeom& cg, const double* avg, double zmid,
                double zwidth, LineRecon& out);

// Convenience form: candidate construction on the fly from edges.
void build_line(ReconKind kind, int n, int t, const double* edges,
                const double* avg, LineRecon& out);

// ---------------------------------------------------------------------------
// Stencil patches: per active cell, the 5^ndim block of virtual cell averages
// at the cell's own level.  Coarser covering cells are virtually refined with
// the limited-gradient interpolant, finer cells are conservatively projected;
// both reduce to donor lists with geometric weights that depend only on the
// mesh, so one geometry serves every field and stage at a mesh version.
// ---------------------------------------------------------------------------

struct PatchDonor {
  std::int32_t slot;                      // donor active slot
  double w_val;                           // h(D cap B)/h(B)
  std::array<double, kMaxDim> w_grad{};   // w_val * (center(D cap B) - center(D))
};

struct GradDonor {
  std::int32_t slot;
  double w;  // h-normalized side weight
};

struct PatchGeometry {
  std::uint64_t mesh_version = ~std::uint64_t{0};
  int ndim = 0;
  int npatch = 0;  // 5^ndim, fixed stride even for clamped windows

  // Patch donors, flattened per cell*npatch.
  std::vector<std::int64_t> donor_begin;
  std::vector<PatchDonor> donors;

  // Per cell*ndim window description: working-coordinate edges (6 used
  // entries), window size and target index.
  std::vector<double> edges;  // (cell*ndim + d)*6 + j
  std::vector<std::uint8_t> wn, wt;

  // Candidate tables per cell*ndim: index into pool5/pool3, or -1 when the
  // window is uniformly spaced (shared static tables apply).
  std::vector<std::int32_t> cand_idx;
  std::vector<CandGeom> pool5, pool3;

  // One-sided gradient structure per cell*ndim*2 (side - then +): donor range
  // plus the full center-offset vector of the side aggregate.  Coarser
  // neighbors sit off-axis tangentially, so slopes are taken against the
  // complete offset, not just the normal component.  A zero normal component
  // marks a missing side.
  std::vector<std::int32_t> gside_begin;
  std::vector<GradDonor> gdonors;
  std::vector<double> gside_dc;  // ((cell*ndim + d)*2 + side)*kMaxDim + tau

  const CandGeom& cand(int cell_slot, int dir, ReconKind kind) const;
};

struct PatchValues {
  int comps = 0;
  std::vector<double> avg;   // ((cell*npatch + slot)*comps + c)
  std::vector<double> grad;  // ((cell*ndim + d)*comps + c)
};

void build_patch_geometry(const ForestMesh& mesh, PatchGeometry& geo);

// Fill per-field values: limited gradients first, then donor sums.
void fill_patch_values(const ForestMesh& mesh, const PatchGeometry& geo,
                       const double* field, int comps, Limiter lim,
                       PatchValues& vals);

// Limited gradient of one cell straight from mesh queries (reference path;
// also the interpolant used when refining).  out[dir][comp].  When hull_lo /
// hull_hi are given (comps entries each) they receive the min / max over the
// cell average and the present side aggregates; one-sided stencils can steepen
// past these bounds, so refinement clamps child values against them.
void limited_gradient(const ForestMesh& mesh, const double* field, int comps,
                      CellId cell, Limiter lim,
                      double out[kMaxDim][kMaxComp],
                      double* hull_lo = nullptr, double* hull_hi = nullptr);

// Evaluate the reconstruction of `cell` at a point given in working
// coordinates (physical coordinate in physical directions, global CDF value
// in stochastic ones).  Dimension-by-dimension: physical sweeps first.
void reconstruct_point(const ForestMesh& mesh, const PatchGeometry& geo,
                       const PatchValues& vals, int cell_slot, ReconKind kind,
                       const double* xi, double* out);

// Trace polynomial along the last working direction at fixed leading
// coordinates: every sweep except the final one is evaluated at xi, and the
// closing blend is returned as a polynomial instead of a value, so one build
// serves many evaluation points on the same plane.  out holds comps entries;
// out[c].eval(t) equals reconstruct_point with xi[last] = t bit for bit.
void reconstruct_trace_line(const ForestMesh& mesh, const PatchGeometry& geo,
                            const PatchValues& vals, int cell_slot,
                            ReconKind kind, const double* xi, LineRecon* out);

// Reference implementation bypassing the cached geometry (slow; for tests).
void reconstruct_point_direct(const ForestMesh& mesh, const double* field,
                              int comps, Limiter lim, CellId cell,
                              ReconKind kind, const double* xi, double* out);

}  // namespace sfv
