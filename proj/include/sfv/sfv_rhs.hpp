#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sfv/field.hpp"
#include "sfv/physics.hpp"
#include "sfv/reconstruction.hpp"

namespace sfv {

// Quadrature layout over the flux faces of one mesh version.  Each face
// carries a tensor rule over its stochastic strip; the rule is shared by the
// two owning cells, so face integrals telescope exactly in the update.
struct FaceQuadCache {
  std::uint64_t mesh_version = ~std::uint64_t(0);
  int npts = 6;
  std::vector<FluxFace> faces;
  std::vector<std::int32_t> qbegin;  // faces.size() + 1
  std::vector<double> qw;            // measure weight per node
  std::vector<double> qxi;           // CDF coordinate per node per stoch dir
  std::vector<double> xminus, xplus;  // trace abscissa per side (wrap aware)
  // Per active slot: (face index, sign) incidence, sign +1 when the cell is
  // on the minus side of the face.
  std::vector<std::int32_t> inc_begin;
  std::vector<std::int32_t> inc_face;
  std::vector<std::int8_t> inc_sign;
  std::vector<std::int32_t> boundary_faces;

  void build(const ForestMesh& mesh, int quad_pts = 6);
};

struct RhsResult {
  // Net measure-weighted outflow rate through the physical boundary.
  std::array<double, kMaxComp> boundary_net = {};
  // Smallest density and pressure seen over all face trace evaluations of
  // this assembly; +inf for scalar laws.
  double min_trace_density = 1e300;
  double min_trace_pressure = 1e300;
};

struct RhsWorkspace {
  PatchValues vals;
  std::vector<double> faceint;
  // Edge trace polynomials, (slot * 2 + side) * comps, side 0 = low edge.
  // Built once per evaluation when the combined domain is two-dimensional;
  // every quadrature node on a face then reduces to two polynomial reads.
  std::vector<LineRecon> lines;
};

// Semi-discrete rate of change of the cell averages: face flux integrals via
// shared quadrature of Rusanov traces, then a divergence gather per cell.
RhsResult compute_rhs(const ForestMesh& mesh, const PatchGeometry& geo,
                      const FaceQuadCache& fq, const ConservationLaw& law,
                      ReconKind kind, Limiter lim, const SolutionField& u,
                      SolutionField& rhs, RhsWorkspace& ws,
                      bool reuse_vals = false);

// Serial reference path: same discretization assembled face by face with
// direct stencil evaluation and its own quadrature, no caches.
RhsResult compute_rhs_reference(const ForestMesh& mesh,
                                const ConservationLaw& law, ReconKind kind,
                                Limiter lim, const SolutionField& u,
                                SolutionField& rhs, int quad_pts = 6);

// Largest stable step from the cell averages, capped by `cap`.
double compute_dt(const ForestMesh& mesh, const ConservationLaw& law,
                  const SolutionField& u, double cfl, double cap);

struct StageRhs {
  SolutionField rhs;
  RhsResult res;
};

struct StepAudit {
  // Time-integrated boundary outflow accumulated over accepted steps.
  std::array<double, kMaxComp> boundary = {};
  // Running minima of the Euler face traces across all stages seen.
  double min_density = 1e300;
  double min_pressure = 1e300;
};

// Strong-stability-preserving three-stage Runge-Kutta step.  The optional
// stage1 reuses an already computed rhs of the input state.  The audit picks
// up the stage boundary flows with the effective weights 1/6, 1/6, 2/3.
void ssp_rk3_step(const ForestMesh& mesh, const PatchGeometry& geo,
                  const FaceQuadCache& fq, const ConservationLaw& law,
                  ReconKind kind, Limiter lim, SolutionField& u, double dt,
                  RhsWorkspace& ws, StepAudit* audit = nullptr,
                  const StageRhs* stage1 = nullptr);

}  // namespace sfv
