#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "sfv/geometry.hpp"
#include "sfv/measures.hpp"

namespace sfv {

using CellId = std::uint32_t;
inline constexpr CellId kInvalidCell = 0xffffffffu;

// Tree node in the cell arena.  Children of one refinement event occupy a
// contiguous id block; split_mask records which directions that event bisected.
struct CellNode {
  IntBox ibox;
  LevelVec level{};
  CellId parent = kInvalidCell;
  CellId first_child = kInvalidCell;
  std::uint8_t child_count = 0;
  std::uint8_t split_mask = 0;
  bool active = false;
  std::int32_t slot = -1;  // dense index into the active ordering, -1 if inactive
};

// Interface between two active cells with a physical normal, carried at the
// granularity of the finer side.  `plus == kInvalidCell` marks a free-flow
// domain boundary face (and `minus == kInvalidCell` one on the low side).
// `strip` is degenerate in `dir` (lo == hi == plane coordinate).
struct FluxFace {
  int dir = 0;
  CellId minus = kInvalidCell;
  CellId plus = kInvalidCell;
  IntBox strip;
  bool wrap = false;  // periodic seam: plus lives at the opposite domain edge
};

enum class Mark : std::uint8_t { keep, refine, coarsen };

struct PlanEntry {
  Mark mark = Mark::keep;
  std::uint8_t dirs = 0;  // refinement direction mask, used when mark == refine
};

// Per-cell adaptation instructions, indexed by the active slot of the mesh the
// plan was built against.
struct RefinementPlan {
  std::vector<PlanEntry> by_slot;
  bool closed = false;
  int closure_passes = 0;
};

// Hierarchical forest of anisotropically bisected boxes over the combined
// physical x stochastic domain.  The active (leaf) cells partition the domain
// at all times.  Geometry is tracked in exact integer units; per-cell measure
// data (slab mass, probabilistic center, CDF bounds) is cached at creation.
class ForestMesh {
 public:
  ForestMesh(const DomainSpec& domain, const ProductMeasure& measure,
             int max_level = 10);

  const DomainSpec& domain() const { return dom_; }
  const ProductMeasure& measure() const { return meas_; }
  int max_level() const { return max_level_; }
  int ndim() const { return dom_.ndim(); }

  // Active cells ordered by ascending id; `slot` fields match positions here.
  const std::vector<CellId>& active() const;
  int n_active() const { return int(active().size()); }
  std::uint64_t version() const { return version_; }

  const CellNode& node(CellId c) const { return nodes_[c]; }
  std::size_t arena_size() const { return nodes_.size(); }

  Box box(CellId c) const;
  double width(CellId c, int dir) const;       // physical width of the extent
  double cell_mass(CellId c) const { return mass_[c]; }
  double cell_volume(CellId c) const { return vol_[c]; }  // phys volume * mass
  // Probabilistic center: geometric midpoint in physical directions, the
  // conditional mean of the slab in stochastic directions.
  double center(CellId c, int dir) const { return center_[c][dir]; }
  // CDF coordinates of the slab bounds (stochastic directions only).
  double cdf_lo(CellId c, int dir) const { return cdflo_[c][dir]; }
  double cdf_hi(CellId c, int dir) const { return cdfhi_[c][dir]; }

  // Measure geometry at arbitrary dyadic coordinates, memoized so that
  // repeated stencil gathers stay cheap and mass sums telescope exactly.
  // Physical directions fall back to plain lengths and midpoints.
  double cdf_at(int dir, std::int64_t u) const;
  double slab_mass(int dir, std::int64_t lo, std::int64_t hi) const;
  double slab_center(int dir, std::int64_t lo, std::int64_t hi) const;

  // Bisect an active cell along the directions in `dir_mask`.  Returns the
  // 2^k children ordered lexicographically (direction 0 varies fastest).
  // Returns an empty list (refusal) when any requested direction is already
  // at the maximum level.  Throws on inactive cells or empty masks.
  std::vector<CellId> refine_cell(CellId cell, std::uint8_t dir_mask);

  // Reactivate `parent` by removing its (all active, childless) children.
  // The exact inverse of the refine_cell call that created them.
  void coarsen_children(CellId parent);

  // Active cells sharing a positive-measure interface with `cell` across
  // side +1/-1 of direction `dir`.  Periodic physical directions wrap; the
  // list is empty beyond a free-flow boundary.  Sorted by id.
  std::vector<CellId> neighbors(CellId cell, int dir, int side) const;

  // All faces with physical normals at fine-side granularity, each interior
  // face exactly once, in a deterministic order.
  std::vector<FluxFace> flux_faces() const;

  // All active cells whose box has positive-measure overlap with `q`.
  void query(const IntBox& q, std::vector<CellId>& out) const;

  // Amend a plan so that executing it preserves the tangential 2:1 level
  // balance across every flux face and only coarsens complete sibling groups.
  // Amendments add refinement directions or cancel coarsenings, never the
  // reverse.  Runs to a fixed point (bounded number of passes).
  void enforce_constraints(RefinementPlan& plan) const;

  // Future per-direction level of a cell under a plan entry (helper shared
  // with the adaptation driver; exposed for tests).
  int future_level(CellId c, int dir, const PlanEntry& e) const;

 private:
  CellId allocate_block(int count);
  void init_cell_geometry(CellId c);
  void descend(CellId n, const IntBox& q, std::vector<CellId>& out) const;
  CellId root_at(const std::array<std::int64_t, kMaxDim>& u) const;
  void mark_dirty();

  DomainSpec dom_;
  ProductMeasure meas_;
  int max_level_;
  std::vector<CellNode> nodes_;
  std::vector<double> mass_, vol_;
  std::vector<std::array<double, kMaxDim>> center_, cdflo_, cdfhi_;
  std::map<int, std::vector<CellId>> free_blocks_;
  std::vector<int> root_stride_;
  int n_roots_ = 0;
  mutable std::vector<CellId> active_;
  mutable bool active_dirty_ = true;
  std::uint64_t version_ = 0;
  // Memo tables keyed by exact integer coordinates (never invalidated: the
  // measure is fixed for the life of the mesh).
  mutable std::array<std::unordered_map<std::uint64_t, double>, kMaxDim> cdf_memo_;
  mutable std::array<std::unordered_map<std::uint64_t, double>, kMaxDim> cmean_memo_;
};

// Intersection helpers on integer boxes (positive-measure overlap in the
// directions where both boxes are nondegenerate).
bool overlaps(const IntBox& a, const IntBox& b, int ndim);
IntBox intersect(const IntBox& a, const IntBox& b, int ndim);

}  // namespace sfv
