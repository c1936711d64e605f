#include "sfv/forest_mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace sfv {

bool overlaps(const IntBox& a, const IntBox& b, int ndim) {
  for (int d = 0; d < ndim; ++d)
    if (!(a.lo[d] < b.hi[d] && b.lo[d] < a.hi[d])) return false;
  return true;
}

IntBox intersect(const IntBox& a, const IntBox& b, int ndim) {
  IntBox r;
  for (int d = 0; d < ndim; ++d) {
    r.lo[d] = std::max(a.lo[d], b.lo[d]);
    r.hi[d] = std::min(a.hi[d], b.hi[d]);
  }
  return r;
}

ForestMesh::ForestMesh(const DomainSpec& domain, const ProductMeasure& measure,
                       int max_level)
    : dom_(domain), meas_(measure), max_level_(max_level) {
  if (dom_.n_physical < 1 || dom_.n_stochastic < 1 ||
      dom_.ndim() > kMaxDim)
    throw ConfigError("domain needs >=1 physical and >=1 stochastic direction");
  if (int(meas_.factors.size()) != dom_.n_stochastic)
    throw ConfigError("measure factor count must match stochastic directions");
  if (max_level_ < 0 || max_level_ > kUnitBits)
    throw ConfigError("max_level out of range");
  const int nd = dom_.ndim();
  n_roots_ = 1;
  root_stride_.assign(nd, 1);
  for (int d = 0; d < nd; ++d) {
    if (dom_.root_cells[d] < 1 || dom_.root_cells[d] > (1 << 20))
      throw ConfigError("root_cells out of range");
    if (!(dom_.lo[d] < dom_.hi[d]))
      throw ConfigError("domain bounds out of order");
    root_stride_[d] = n_roots_;
    n_roots_ *= dom_.root_cells[d];
  }
  for (int s = 0; s < dom_.n_stochastic; ++s) {
    const Measure1D& f = meas_.factors[s];
    int d = dom_.n_physical + s;
    if (f.support_lo() != dom_.lo[d] || f.support_hi() != dom_.hi[d])
      throw ConfigError("stochastic domain bounds must match the measure support");
  }

  nodes_.resize(n_roots_);
  mass_.resize(n_roots_);
  vol_.resize(n_roots_);
  center_.resize(n_roots_);
  cdflo_.resize(n_roots_);
  cdfhi_.resize(n_roots_);
  for (int r = 0; r < n_roots_; ++r) {
    CellNode& n = nodes_[r];
    int rem = r;
    for (int d = nd - 1; d >= 0; --d) {
      int idx = rem / root_stride_[d];
      rem %= root_stride_[d];
      n.ibox.lo[d] = std::int64_t(idx) * kUnitsPerRoot;
      n.ibox.hi[d] = n.ibox.lo[d] + kUnitsPerRoot;
    }
    n.active = true;
    init_cell_geometry(CellId(r));
  }
  mark_dirty();
}

double ForestMesh::cdf_at(int dir, std::int64_t u) const {
  if (dom_.is_physical(dir)) return 0.0;
  auto& memo = cdf_memo_[dir];
  auto it = memo.find(std::uint64_t(u));
  if (it != memo.end()) return it->second;
  const Measure1D& f = meas_.factors[dir - dom_.n_physical];
  double v = cdf(f, dom_.coord(dir, u));
  if (u == 0) v = 0.0;
  if (u == dom_.units(dir)) v = 1.0;
  memo.emplace(std::uint64_t(u), v);
  return v;
}

double ForestMesh::slab_mass(int dir, std::int64_t lo, std::int64_t hi) const {
  if (dom_.is_physical(dir))
    return dom_.coord(dir, hi) - dom_.coord(dir, lo);
  return std::max(0.0, cdf_at(dir, hi) - cdf_at(dir, lo));
}

double ForestMesh::slab_center(int dir, std::int64_t lo, std::int64_t hi) const {
  if (dom_.is_physical(dir))
    return 0.5 * (dom_.coord(dir, lo) + dom_.coord(dir, hi));
  // Dyadic intervals have power-of-two integer length; (lo, log2 len) is an
  // exact key.
  int k = 0;
  while ((std::int64_t(1) << k) < hi - lo) ++k;
  std::uint64_t key = (std::uint64_t(lo) << 5) | std::uint64_t(k);
  auto& memo = cmean_memo_[dir];
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  const Measure1D& f = meas_.factors[dir - dom_.n_physical];
  double v = conditional_mean(f, dom_.coord(dir, lo), dom_.coord(dir, hi));
  memo.emplace(key, v);
  return v;
}

void ForestMesh::init_cell_geometry(CellId c) {
  const CellNode& n = nodes_[c];
  double m = 1.0;
  double physvol = 1.0;
  for (int d = 0; d < dom_.ndim(); ++d) {
    double lo = dom_.coord(d, n.ibox.lo[d]);
    double hi = dom_.coord(d, n.ibox.hi[d]);
    if (dom_.is_physical(d)) {
      physvol *= hi - lo;
      center_[c][d] = 0.5 * (lo + hi);
      cdflo_[c][d] = 0.0;
      cdfhi_[c][d] = 0.0;
    } else {
      double clo = cdf_at(d, n.ibox.lo[d]);
      double chi = cdf_at(d, n.ibox.hi[d]);
      cdflo_[c][d] = clo;
      cdfhi_[c][d] = chi;
      m *= std::max(0.0, chi - clo);
      center_[c][d] = slab_center(d, n.ibox.lo[d], n.ibox.hi[d]);
    }
  }
  mass_[c] = m;
  vol_[c] = physvol * m;
}

Box ForestMesh::box(CellId c) const {
  const CellNode& n = nodes_[c];
  Box b;
  for (int d = 0; d < dom_.ndim(); ++d) {
    b.lo[d] = dom_.coord(d, n.ibox.lo[d]);
    b.hi[d] = dom_.coord(d, n.ibox.hi[d]);
  }
  return b;
}

double ForestMesh::width(CellId c, int dir) const {
  const CellNode& n = nodes_[c];
  return dom_.coord(dir, n.ibox.hi[dir]) - dom_.coord(dir, n.ibox.lo[dir]);
}

const std::vector<CellId>& ForestMesh::active() const {
  if (active_dirty_) {
    active_.clear();
    for (CellId c = 0; c < nodes_.size(); ++c)
      if (nodes_[c].active) active_.push_back(c);
    for (std::size_t i = 0; i < active_.size(); ++i)
      const_cast<CellNode&>(nodes_[active_[i]]).slot = std::int32_t(i);
    active_dirty_ = false;
  }
  return active_;
}

void ForestMesh::mark_dirty() {
  active_dirty_ = true;
  ++version_;
}

CellId ForestMesh::allocate_block(int count) {
  auto it = free_blocks_.find(count);
  if (it != free_blocks_.end() && !it->second.empty()) {
    CellId id = it->second.back();
    it->second.pop_back();
    return id;
  }
  CellId id = CellId(nodes_.size());
  nodes_.resize(nodes_.size() + count);
  mass_.resize(nodes_.size());
  vol_.resize(nodes_.size());
  center_.resize(nodes_.size());
  cdflo_.resize(nodes_.size());
  cdfhi_.resize(nodes_.size());
  return id;
}

std::vector<CellId> ForestMesh::refine_cell(CellId cell, std::uint8_t dir_mask) {
  const int nd = dom_.ndim();
  if (cell >= nodes_.size() || !nodes_[cell].active)
    throw std::logic_error("refine_cell: cell is not an active leaf");
  if (dir_mask == 0 || (dir_mask >> nd) != 0)
    throw std::logic_error("refine_cell: empty or out-of-range direction mask");
  for (int d = 0; d < nd; ++d)
    if ((dir_mask >> d) & 1)
      if (nodes_[cell].level[d] >= max_level_) return {};  // refusal

  // Pre-check stochastic slab masses of the prospective children so a
  // degenerate split leaves the mesh untouched.
  for (int s = 0; s < dom_.n_stochastic; ++s) {
    int d = dom_.n_physical + s;
    if (!((dir_mask >> d) & 1)) continue;
    const CellNode& n = nodes_[cell];
    std::int64_t mid = (n.ibox.lo[d] + n.ibox.hi[d]) / 2;
    double c0 = cdf_at(d, n.ibox.lo[d]);
    double c1 = cdf_at(d, mid);
    double c2 = cdf_at(d, n.ibox.hi[d]);
    if (!(c1 - c0 > 0.0) || !(c2 - c1 > 0.0))
      throw DegenerateCellError("refine_cell: child slab carries no mass");
  }

  int k = std::popcount(dir_mask);
  int count = 1 << k;
  CellId first = allocate_block(count);
  CellNode parent_snapshot = nodes_[cell];  // arena may have been resized

  std::array<int, kMaxDim> split_dirs{};
  int nsplit = 0;
  for (int d = 0; d < nd; ++d)
    if ((dir_mask >> d) & 1) split_dirs[nsplit++] = d;

  std::vector<CellId> children(count);
  for (int i = 0; i < count; ++i) {
    CellId cid = first + i;
    CellNode& ch = nodes_[cid];
    ch = CellNode{};
    ch.ibox = parent_snapshot.ibox;
    ch.level = parent_snapshot.level;
    for (int b = 0; b < nsplit; ++b) {
      int d = split_dirs[b];
      std::int64_t mid = (parent_snapshot.ibox.lo[d] + parent_snapshot.ibox.hi[d]) / 2;
      if ((i >> b) & 1)
        ch.ibox.lo[d] = mid;
      else
        ch.ibox.hi[d] = mid;
      ch.level[d] = std::uint8_t(parent_snapshot.level[d] + 1);
    }
    ch.parent = cell;
    ch.active = true;
    init_cell_geometry(cid);
    children[i] = cid;
  }
  CellNode& p = nodes_[cell];
  p.active = false;
  p.slot = -1;
  p.first_child = first;
  p.child_count = std::uint8_t(count);
  p.split_mask = dir_mask;
  mark_dirty();
  return children;
}

void ForestMesh::coarsen_children(CellId parent) {
  if (parent >= nodes_.size()) throw std::logic_error("coarsen_children: bad id");
  CellNode& p = nodes_[parent];
  if (p.active || p.child_count == 0)
    throw std::logic_error("coarsen_children: parent has no refined children");
  for (int i = 0; i < p.child_count; ++i) {
    const CellNode& ch = nodes_[p.first_child + i];
    if (!ch.active)
      throw std::logic_error("coarsen_children: child is not a leaf");
  }
  for (int i = 0; i < p.child_count; ++i) {
    CellNode& ch = nodes_[p.first_child + i];
    ch.active = false;
    ch.slot = -1;
    ch.parent = kInvalidCell;
  }
  free_blocks_[p.child_count].push_back(p.first_child);
  p.first_child = kInvalidCell;
  p.child_count = 0;
  p.split_mask = 0;
  p.active = true;
  mark_dirty();
}

CellId ForestMesh::root_at(const std::array<std::int64_t, kMaxDim>& u) const {
  int id = 0;
  for (int d = 0; d < dom_.ndim(); ++d)
    id += int(u[d] >> kUnitBits) * root_stride_[d];
  return CellId(id);
}

void ForestMesh::descend(CellId n, const IntBox& q, std::vector<CellId>& out) const {
  const CellNode& node = nodes_[n];
  if (!overlaps(node.ibox, q, dom_.ndim())) return;
  if (node.active) {
    out.push_back(n);
    return;
  }
  for (int i = 0; i < node.child_count; ++i) descend(node.first_child + i, q, out);
}

void ForestMesh::query(const IntBox& q, std::vector<CellId>& out) const {
  const int nd = dom_.ndim();
  std::array<int, kMaxDim> rlo{}, rhi{};
  for (int d = 0; d < nd; ++d) {
    rlo[d] = int(q.lo[d] >> kUnitBits);
    rhi[d] = int((q.hi[d] - 1) >> kUnitBits);
    rlo[d] = std::max(rlo[d], 0);
    rhi[d] = std::min(rhi[d], dom_.root_cells[d] - 1);
    if (rlo[d] > rhi[d]) return;
  }
  std::array<int, kMaxDim> it = rlo;
  while (true) {
    int id = 0;
    for (int d = 0; d < nd; ++d) id += it[d] * root_stride_[d];
    descend(CellId(id), q, out);
    int d = 0;
    for (; d < nd; ++d) {
      if (++it[d] <= rhi[d]) break;
      it[d] = rlo[d];
    }
    if (d == nd) break;
  }
}

std::vector<CellId> ForestMesh::neighbors(CellId cell, int dir, int side) const {
  const CellNode& n = nodes_[cell];
  const std::int64_t units = dom_.units(dir);
  IntBox strip = n.ibox;
  if (side > 0) {
    if (n.ibox.hi[dir] == units) {
      if (!dom_.periodic(dir)) return {};
      strip.lo[dir] = 0;
      strip.hi[dir] = 1;
    } else {
      strip.lo[dir] = n.ibox.hi[dir];
      strip.hi[dir] = n.ibox.hi[dir] + 1;
    }
  } else {
    if (n.ibox.lo[dir] == 0) {
      if (!dom_.periodic(dir)) return {};
      strip.lo[dir] = units - 1;
      strip.hi[dir] = units;
    } else {
      strip.lo[dir] = n.ibox.lo[dir] - 1;
      strip.hi[dir] = n.ibox.lo[dir];
    }
  }
  std::vector<CellId> out;
  query(strip, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<FluxFace> ForestMesh::flux_faces() const {
  std::vector<FluxFace> faces;
  const int nd = dom_.ndim();
  for (CellId c : active()) {
    const CellNode& n = nodes_[c];
    for (int dir = 0; dir < dom_.n_physical; ++dir) {
      const std::int64_t units = dom_.units(dir);
      bool at_hi = (n.ibox.hi[dir] == units);
      bool wrap = at_hi && dom_.periodic(dir);
      if (at_hi && !wrap) {
        FluxFace f;
        f.dir = dir;
        f.minus = c;
        f.strip = n.ibox;
        f.strip.lo[dir] = f.strip.hi[dir] = units;
        faces.push_back(f);
      } else {
        for (CellId b : neighbors(c, dir, +1)) {
          FluxFace f;
          f.dir = dir;
          f.minus = c;
          f.plus = b;
          f.wrap = wrap;
          IntBox nb = nodes_[b].ibox;
          if (wrap) {  // express the neighbor in this cell's frame
            nb.lo[dir] += units;
            nb.hi[dir] += units;
          }
          f.strip = intersect(n.ibox, nb, nd);
          f.strip.lo[dir] = f.strip.hi[dir] = n.ibox.hi[dir];
          faces.push_back(f);
        }
      }
      if (n.ibox.lo[dir] == 0 && !dom_.periodic(dir)) {
        FluxFace f;
        f.dir = dir;
        f.plus = c;
        f.strip = n.ibox;
        f.strip.hi[dir] = f.strip.lo[dir] = 0;
        faces.push_back(f);
      }
    }
  }
  return faces;
}

int ForestMesh::future_level(CellId c, int dir, const PlanEntry& e) const {
  const CellNode& n = nodes_[c];
  int lvl = n.level[dir];
  if (e.mark == Mark::refine && ((e.dirs >> dir) & 1)) return lvl + 1;
  if (e.mark == Mark::coarsen && n.parent != kInvalidCell) {
    const CellNode& p = nodes_[n.parent];
    if ((p.split_mask >> dir) & 1) return lvl - 1;
  }
  return lvl;
}

void ForestMesh::enforce_constraints(RefinementPlan& plan) const {
  const auto& act = active();
  if (plan.by_slot.size() != act.size())
    throw std::logic_error("enforce_constraints: plan does not match mesh");
  const int nd = dom_.ndim();

  // Strip refinement directions that are already at the level cap.
  for (std::size_t s = 0; s < act.size(); ++s) {
    PlanEntry& e = plan.by_slot[s];
    if (e.mark != Mark::refine) continue;
    const CellNode& n = nodes_[act[s]];
    std::uint8_t mask = e.dirs;
    for (int d = 0; d < nd; ++d)
      if (((mask >> d) & 1) && n.level[d] >= max_level_) mask &= std::uint8_t(~(1u << d));
    e.dirs = mask;
    if (mask == 0) e.mark = Mark::keep;
  }

  auto entry = [&](CellId c) -> PlanEntry& {
    return plan.by_slot[std::size_t(nodes_[c].slot)];
  };

  // Raise a cell's future level in direction tau by one step of the amendment
  // lattice: cancel a coarsening first, then add a refinement direction.
  auto raise = [&](CellId c, int tau) {
    PlanEntry& e = entry(c);
    if (e.mark == Mark::coarsen) {
      e.mark = Mark::keep;
      e.dirs = 0;
      return;
    }
    if (e.mark == Mark::keep) {
      e.mark = Mark::refine;
      e.dirs = std::uint8_t(1u << tau);
      return;
    }
    if (!((e.dirs >> tau) & 1)) {
      e.dirs |= std::uint8_t(1u << tau);
      return;
    }
    throw std::logic_error(
        "enforce_constraints: balance requires more than one level per step "
        "(base mesh not conforming?)");
  };

  int pass = 0;
  for (; pass < 64; ++pass) {
    bool changed = false;

    // Coarsening is only the unwinding of a complete sibling group: every
    // child of the parent must be an active leaf marked coarsen.
    for (std::size_t s = 0; s < act.size(); ++s) {
      if (plan.by_slot[s].mark != Mark::coarsen) continue;
      CellId c = act[s];
      CellId p = nodes_[c].parent;
      bool ok = (p != kInvalidCell);
      if (ok) {
        const CellNode& pn = nodes_[p];
        for (int i = 0; i < pn.child_count && ok; ++i) {
          CellId sib = pn.first_child + i;
          ok = nodes_[sib].active &&
               plan.by_slot[std::size_t(nodes_[sib].slot)].mark == Mark::coarsen;
        }
      }
      if (!ok) {
        plan.by_slot[s].mark = Mark::keep;
        changed = true;
      }
    }

    // Tangential 2:1 balance across every current flux adjacency, evaluated
    // on post-plan levels.  Checking current adjacencies is exhaustive: a
    // parent created by coarsening inherits exactly its children's faces.
    for (CellId a : act) {
      for (int dir = 0; dir < dom_.n_physical; ++dir) {
        for (CellId b : neighbors(a, dir, +1)) {
          for (int tau = 0; tau < nd; ++tau) {
            if (tau == dir) continue;
            for (int guard = 0; guard < 4; ++guard) {
              int fa = future_level(a, tau, entry(a));
              int fb = future_level(b, tau, entry(b));
              if (fa - fb >= 2) {
                raise(b, tau);
                changed = true;
              } else if (fb - fa >= 2) {
                raise(a, tau);
                changed = true;
              } else {
                break;
              }
            }
          }
        }
      }
    }

    if (!changed) break;
  }
  plan.closed = true;
  plan.closure_passes = pass + 1;
}

}  // namespace sfv
