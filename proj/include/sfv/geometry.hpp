#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace sfv {

// The combined computational domain has ndim = n_physical + n_stochastic
// directions.  Physical directions come first.  Four directions is enough for
// the 1-D physics exercised here plus up to three stochastic parameters.
inline constexpr int kMaxDim = 4;

// Cell extents are tracked in exact integer coordinates: every root cell spans
// 2^kUnitBits units per direction, and one bisection halves the unit count.
// This makes adjacency and containment tests exact and keeps refinement depth
// bounded by kUnitBits levels below the root grid.
inline constexpr int kUnitBits = 24;
inline constexpr std::int64_t kUnitsPerRoot = std::int64_t{1} << kUnitBits;

using LevelVec = std::array<std::uint8_t, kMaxDim>;

// Axis-aligned box in integer mesh units.
struct IntBox {
  std::array<std::int64_t, kMaxDim> lo{};
  std::array<std::int64_t, kMaxDim> hi{};
};

// Axis-aligned box in domain coordinates.
struct Box {
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
};

enum class BoundaryKind { periodic, free_flow };

// Static description of the tensor domain: direction count, per-direction
// bounds, root grid resolution, and physical boundary treatment.
struct DomainSpec {
  int n_physical = 1;
  int n_stochastic = 1;
  std::array<double, kMaxDim> lo{};
  std::array<double, kMaxDim> hi{};
  std::array<int, kMaxDim> root_cells{};                 // >= 1 per direction
  std::array<BoundaryKind, kMaxDim> boundary{};          // physical dirs only

  int ndim() const { return n_physical + n_stochastic; }
  bool is_physical(int dir) const { return dir < n_physical; }
  bool periodic(int dir) const {
    return is_physical(dir) && boundary[dir] == BoundaryKind::periodic;
  }
  double width(int dir) const { return hi[dir] - lo[dir]; }
  // Total integer extent of the domain along dir.
  std::int64_t units(int dir) const {
    return std::int64_t(root_cells[dir]) * kUnitsPerRoot;
  }
  // Map an integer coordinate to a domain coordinate.
  double coord(int dir, std::int64_t u) const {
    return lo[dir] + (double(u) / double(units(dir))) * width(dir);
  }
};

}  // namespace sfv
