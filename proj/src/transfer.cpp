#include "sfv/transfer.hpp"

#include <array>
#include <stdexcept>
#include <unordered_map>

namespace sfv {

TransferReport apply_plan(ForestMesh& mesh, const RefinementPlan& plan,
                          SolutionField& field, Limiter lim,
                          const std::function<bool(const double*)>& state_ok) {
  const std::vector<CellId> act0 = mesh.active();
  if (plan.by_slot.size() != act0.size() ||
      field.data.size() != act0.size() * std::size_t(field.comps))
    throw std::logic_error("apply_plan: plan, field and mesh disagree");
  const int comps = field.comps;
  const int nd = mesh.domain().ndim();
  const std::vector<double> old = std::move(field.data);

  std::unordered_map<CellId, std::size_t> slot0;
  slot0.reserve(act0.size());
  for (std::size_t s = 0; s < act0.size(); ++s) slot0.emplace(act0[s], s);

  // Gradients for every cell about to split, taken before any mutation so
  // the stencils see the current mesh.
  std::vector<std::size_t> refine_slots;
  for (std::size_t s = 0; s < act0.size(); ++s)
    if (plan.by_slot[s].mark == Mark::refine) refine_slots.push_back(s);
  std::vector<std::array<std::array<double, kMaxComp>, kMaxDim>> grads(
      refine_slots.size());
  std::vector<std::array<double, 2 * kMaxComp>> hulls(refine_slots.size());
  for (std::size_t i = 0; i < refine_slots.size(); ++i) {
    double g[kMaxDim][kMaxComp];
    limited_gradient(mesh, old.data(), comps, act0[refine_slots[i]], lim, g,
                     hulls[i].data(), hulls[i].data() + kMaxComp);
    for (int d = 0; d < kMaxDim; ++d)
      for (int c = 0; c < kMaxComp; ++c) grads[i][d][c] = g[d][c];
  }

  // Values keyed by node id for cells that exist only after the mutation.
  std::unordered_map<CellId, std::array<double, kMaxComp>> fresh;
  TransferReport rep;

  std::vector<CellId> kids;
  std::vector<std::array<double, kMaxComp>> offs;
  for (std::size_t i = 0; i < refine_slots.size(); ++i) {
    const std::size_t s = refine_slots[i];
    const CellId c = act0[s];
    double pc[kMaxDim];
    for (int d = 0; d < nd; ++d) pc[d] = mesh.center(c, d);
    const double* pu = old.data() + s * std::size_t(comps);
    kids.clear();
    offs.clear();
    for (CellId k : mesh.refine_cell(c, plan.by_slot[s].dirs)) {
      std::array<double, kMaxComp> off{};
      for (int cc = 0; cc < comps; ++cc)
        for (int d = 0; d < nd; ++d)
          off[cc] += grads[i][d][cc] * (mesh.center(k, d) - pc[d]);
      kids.push_back(k);
      offs.push_back(off);
    }
    // One scale per component over the whole sibling group keeps the
    // telescoping sum, so conservation survives the clamp.
    double scale[kMaxComp];
    for (int cc = 0; cc < comps; ++cc) {
      const double lo = hulls[i][cc] - pu[cc];
      const double hi = hulls[i][kMaxComp + cc] - pu[cc];
      double sc = 1.0;
      for (const auto& off : offs) {
        if (off[cc] > hi && off[cc] > 0.0) sc = std::min(sc, hi / off[cc]);
        if (off[cc] < lo && off[cc] < 0.0) sc = std::min(sc, lo / off[cc]);
      }
      scale[cc] = std::max(sc, 0.0);
    }
    if (state_ok) {
      // The parent passed, so halving toward the flat copy terminates.
      for (int tries = 0; tries < 64; ++tries) {
        bool ok = true;
        double v[kMaxComp];
        for (std::size_t k = 0; k < kids.size() && ok; ++k) {
          for (int cc = 0; cc < comps; ++cc)
            v[cc] = pu[cc] + scale[cc] * offs[k][cc];
          ok = state_ok(v);
        }
        if (ok) break;
        for (int cc = 0; cc < comps; ++cc)
          scale[cc] = tries + 1 < 64 ? 0.5 * scale[cc] : 0.0;
      }
    }
    for (std::size_t k = 0; k < kids.size(); ++k) {
      std::array<double, kMaxComp> v{};
      for (int cc = 0; cc < comps; ++cc)
        v[cc] = pu[cc] + scale[cc] * offs[k][cc];
      fresh.emplace(kids[k], v);
    }
    ++rep.refined;
  }

  // Coarsening reads the child averages before the group is released.
  std::vector<char> consumed(act0.size(), 0);
  for (std::size_t s = 0; s < act0.size(); ++s) {
    if (plan.by_slot[s].mark != Mark::coarsen || consumed[s]) continue;
    const CellId parent = mesh.node(act0[s]).parent;
    const CellNode& pn = mesh.node(parent);
    std::array<double, kMaxComp> v{};
    double htot = 0.0;
    for (int i = 0; i < pn.child_count; ++i) {
      const CellId ch = pn.first_child + CellId(i);
      const std::size_t cs = slot0.at(ch);
      consumed[cs] = 1;
      const double h = mesh.cell_volume(ch);
      htot += h;
      for (int cc = 0; cc < comps; ++cc) v[cc] += h * old[cs * comps + cc];
    }
    for (int cc = 0; cc < comps; ++cc) v[cc] /= htot;
    mesh.coarsen_children(parent);
    fresh.emplace(parent, v);
    ++rep.coarsened;
  }

  const std::vector<CellId>& act1 = mesh.active();
  field.data.resize(act1.size() * std::size_t(comps));
  for (std::size_t s = 0; s < act1.size(); ++s) {
    auto it = fresh.find(act1[s]);
    if (it != fresh.end()) {
      for (int cc = 0; cc < comps; ++cc)
        field.data[s * comps + cc] = it->second[cc];
    } else {
      const std::size_t os = slot0.at(act1[s]);
      for (int cc = 0; cc < comps; ++cc)
        field.data[s * comps + cc] = old[os * comps + cc];
    }
  }
  return rep;
}

}  // namespace sfv
