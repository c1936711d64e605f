#pragma once

#include <cstdint>
#include <vector>

#include "sfv/forest_mesh.hpp"

namespace sfv {

// Cell averages stored in the active ordering of one mesh version.  Any mesh
// mutation invalidates the layout; apply_plan keeps field and mesh in step.
struct SolutionField {
  int comps = 1;
  std::vector<double> data;

  void resize_for(const ForestMesh& mesh) {
    data.assign(mesh.n_active() * std::size_t(comps), 0.0);
  }
  double* at(std::int32_t slot) {
    return data.data() + std::size_t(slot) * std::size_t(comps);
  }
  const double* at(std::int32_t slot) const {
    return data.data() + std::size_t(slot) * std::size_t(comps);
  }
};

// Measure-weighted integral of one component over the active cells.
inline double total_integral(const ForestMesh& mesh, const SolutionField& f,
                             int comp) {
  const std::vector<CellId>& act = mesh.active();
  double sum = 0.0;
  for (std::size_t s = 0; s < act.size(); ++s)
    sum += mesh.cell_volume(act[s]) * f.data[s * std::size_t(f.comps) + comp];
  return sum;
}

}  // namespace sfv
