#pragma once

#include <functional>

#include "sfv/field.hpp"
#include "sfv/reconstruction.hpp"

namespace sfv {

struct TransferReport {
  int refined = 0;
  int coarsened = 0;
};

// Executes a closed refinement plan on mesh and field together.  Children of
// a refined cell get the parent average plus a limited linear correction at
// the child centers; the correction telescopes to zero against the child
// measures, so the parent integral is preserved, and each component is
// rescaled as a sibling group so no child leaves the hull of the parent and
// its side aggregates (one-sided boundary stencils can otherwise overshoot).
// Coarsened sibling groups collapse to their measure-weighted average.  The
// plan must have passed enforce_constraints on this mesh version.  When
// `state_ok` is given, any sibling group with a child it rejects has its
// correction halved until every child passes, ending at the plain parent
// copy, which is assumed admissible.
TransferReport apply_plan(ForestMesh& mesh, const RefinementPlan& plan,
                          SolutionField& field,
                          Limiter lim = Limiter::minmod,
                          const std::function<bool(const double*)>& state_ok =
                              nullptr);

}  // namespace sfv
