#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sfv/config.hpp"
#include "sfv/problems.hpp"

namespace sfv {

struct PhaseTimes {
  double assembly = 0.0;  // time stepping
  double adapt = 0.0;     // indicator + mesh edits
  double stats = 0.0;     // post-processing and file output
  double total = 0.0;
};

struct RunTotals {
  int steps = 0;
  double t_final = 0.0;
  std::vector<std::size_t> ndof_history;  // active cells after each adapt
  std::array<double, kMaxComp> total_initial = {};
  std::array<double, kMaxComp> total_final = {};
  std::array<double, kMaxComp> boundary = {};  // time-integrated net outflow
  std::array<double, kMaxComp> drift = {};     // final - initial + boundary
  double drift_rel = 0.0;  // max |drift| over the initial L1 scale
  double min_trace_density = 1e300;   // Euler only, over every stage
  double min_trace_pressure = 1e300;
  PhaseTimes wall;
};

struct RunResult {
  RunConfig cfg;
  std::shared_ptr<ForestMesh> mesh;
  SolutionField u;
  RunTotals totals;
  bool aborted = false;
  std::string abort_reason;
};

// Advances the configured benchmark to t_end.  Adaptive mode interleaves
// mesh adaptation with each step and re-projects the initial data while the
// starting mesh settles; uniform mode steps on the root grid.  With
// write_artifacts set and a nonempty out_dir the run directory receives
// moments.csv, pdf_c<k>.csv, mesh.csv, adapt_log.csv, and manifest.json.
// A positivity abort is reported in the result, not rethrown.
RunResult run(const RunConfig& cfg, bool write_artifacts = true);

// Sum of h_T * U_T per component over the active cells.
std::array<double, kMaxComp> conserved_totals(const ForestMesh& mesh,
                                              const SolutionField& u);

// Per-cell dump of the mesh and averages: integer anchors, levels, boxes,
// CDF bounds, mass, volume, and the component averages, 17 significant
// digits.  load_mesh_csv rebuilds exactly that partition on a fresh forest
// built from the same config and returns the field.
void write_mesh_csv(std::ostream& os, const ForestMesh& mesh,
                    const SolutionField& u);
SolutionField load_mesh_csv(std::istream& is, ForestMesh& mesh);

struct LoadedRun {
  RunConfig cfg;
  std::shared_ptr<ForestMesh> mesh;
  SolutionField u;
  RunTotals totals;
  bool aborted = false;
};

// Rehydrates a finished run directory (manifest.json + mesh.csv).
LoadedRun load_run_dir(const std::string& dir);

// Runs with artifacts under cache_dir/<config hash>, or loads that directory
// when a finished manifest is already there.
LoadedRun run_cached(const RunConfig& cfg, const std::string& cache_dir);

}  // namespace sfv
