#pragma once

#include <string>
#include <vector>

#include "sfv/errors.hpp"
#include "sfv/geometry.hpp"
#include "sfv/measures.hpp"
#include "sfv/physics.hpp"
#include "sfv/reconstruction.hpp"

#include "json.hpp"

namespace sfv {

enum class RunMode { adaptive, uniform };

struct LawConfig {
  LawKind kind = LawKind::advection;
  double speed = 1.0;  // advection only
  double gamma = 1.4;  // euler only
};

struct DomainConfig {
  double x_lo = 0.0;
  double x_hi = 1.0;
  BoundaryKind boundary = BoundaryKind::periodic;
};

struct MeshConfig {
  int cells_per_dim = 16;
  int max_level = 6;
  RunMode mode = RunMode::adaptive;
};

struct ToleranceConfig {
  double eps_per_dt = 1e-4;   // indicator budget per unit time
  double eps_aniso = 0.5;     // direction share threshold; <= 0 means all
  double coarsen_frac = 0.1;
  double c_ref = 1.0;
};

struct StepperConfig {
  double t_end = 0.25;
  double cfl = 0.4;
  double dt_cap = 0.0;  // 0 disables the cap
};

struct ReconConfig {
  ReconKind high = ReconKind::weno5;
  ReconKind low = ReconKind::weno3;
  Limiter lim = Limiter::minmod;
  int quad_pts = 6;
};

struct OutputConfig {
  int probes = 101;       // moment probe count across the physical domain
  int pdf_samples = 4096;
  int pdf_grid = 512;
  std::vector<double> pdf_probes;  // physical locations for density CSVs
  std::string out_dir;
};

struct RunConfig {
  std::string problem;     // transport | burgers_sine | euler_three_state
  bool y_constant = false; // strip the stochastic dependence from the IC
  LawConfig law;
  Measure1D measure;
  DomainConfig domain;
  MeshConfig mesh;
  ToleranceConfig tolerances;
  StepperConfig stepper;
  ReconConfig recon;
  OutputConfig outputs;
};

// Built-in defaults for a benchmark id, as a JSON document with every key
// present.  User input is merged over this before binding.
nlohmann::json problem_defaults(const std::string& id);

// Merged, validated bind of a user document.  Unknown keys anywhere, wrong
// types, unknown enum strings, and out-of-range values all raise ConfigError.
RunConfig parse_config(const nlohmann::json& user);

// Applies one dotted-path assignment ("mesh.cells_per_dim=64") onto the raw
// document.  The value text is parsed as JSON when possible, else kept as a
// string.
void apply_override(nlohmann::json& doc, const std::string& spec);

// Full echo of a bound config, suitable for re-parsing; used by the manifest
// and as the cache identity of a run.
nlohmann::json config_to_json(const RunConfig& cfg);

// FNV-1a of the canonical echo text; stable across processes.
std::string config_hash(const RunConfig& cfg);

}  // namespace sfv
