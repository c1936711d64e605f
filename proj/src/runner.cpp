#include "sfv/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sfv/adaptivity.hpp"
#include "sfv/statistics.hpp"

namespace sfv {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_between(clock_type::time_point a, clock_type::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Compensated accumulator; keeps conservation audits at roundoff even for
// hundreds of thousands of terms.
struct Kahan {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

AdaptParams adapt_params(const RunConfig& cfg) {
  AdaptParams ap;
  ap.high = cfg.recon.high;
  ap.low = cfg.recon.low;
  ap.lim = cfg.recon.lim;
  ap.eps_per_dt = cfg.tolerances.eps_per_dt;
  ap.c_ref = cfg.tolerances.c_ref;
  ap.coarsen_frac = cfg.tolerances.coarsen_frac;
  ap.eps_aniso = cfg.tolerances.eps_aniso;
  ap.max_level = cfg.mesh.max_level;
  ap.quad_pts = cfg.recon.quad_pts;
  return ap;
}

struct LogRow {
  int step;
  double t, dt;
  int iterations, refined, coarsened;
  std::size_t ndofs;
  double max_eta;
};

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json totals_to_json(const RunTotals& tt, int comps) {
  nlohmann::json j;
  j["steps"] = tt.steps;
  j["t_final"] = tt.t_final;
  j["ndofs_final"] =
      tt.ndof_history.empty() ? 0 : tt.ndof_history.back();
  std::size_t peak = 0;
  for (std::size_t n : tt.ndof_history) peak = std::max(peak, n);
  j["ndofs_peak"] = peak;
  j["ndof_history"] = tt.ndof_history;
  auto arr = [comps](const std::array<double, kMaxComp>& a) {
    return std::vector<double>(a.begin(), a.begin() + comps);
  };
  j["total_initial"] = arr(tt.total_initial);
  j["total_final"] = arr(tt.total_final);
  j["boundary_outflow"] = arr(tt.boundary);
  j["drift"] = arr(tt.drift);
  j["drift_rel"] = tt.drift_rel;
  j["min_trace_density"] = tt.min_trace_density;
  j["min_trace_pressure"] = tt.min_trace_pressure;
  j["wall"] = {{"assembly", tt.wall.assembly},
               {"adapt", tt.wall.adapt},
               {"stats", tt.wall.stats},
               {"total", tt.wall.total}};
  return j;
}

void totals_from_json(const nlohmann::json& j, RunTotals& tt) {
  tt.steps = j.value("steps", 0);
  tt.t_final = j.value("t_final", 0.0);
  if (j.contains("ndof_history"))
    tt.ndof_history = j["ndof_history"].get<std::vector<std::size_t>>();
  auto arr = [&j](const char* key, std::array<double, kMaxComp>& a) {
    if (!j.contains(key)) return;
    const auto v = j[key].get<std::vector<double>>();
    for (std::size_t i = 0; i < v.size() && i < std::size_t(kMaxComp); ++i)
      a[i] = v[i];
  };
  arr("total_initial", tt.total_initial);
  arr("total_final", tt.total_final);
  arr("boundary_outflow", tt.boundary);
  arr("drift", tt.drift);
  tt.drift_rel = j.value("drift_rel", 0.0);
  tt.min_trace_density = j.value("min_trace_density", 1e300);
  tt.min_trace_pressure = j.value("min_trace_pressure", 1e300);
  if (j.contains("wall")) {
    tt.wall.assembly = j["wall"].value("assembly", 0.0);
    tt.wall.adapt = j["wall"].value("adapt", 0.0);
    tt.wall.stats = j["wall"].value("stats", 0.0);
    tt.wall.total = j["wall"].value("total", 0.0);
  }
}

void write_adapt_log(std::ostream& os, const std::vector<LogRow>& rows) {
  os << "step,t,dt,iterations,refined,coarsened,ndofs,max_eta\n";
  for (const LogRow& r : rows) {
    os << r.step << ',' << fmt17(r.t) << ',' << fmt17(r.dt) << ','
       << r.iterations << ',' << r.refined << ',' << r.coarsened << ','
       << r.ndofs << ',' << fmt17(r.max_eta) << '\n';
  }
}

}  // namespace

std::array<double, kMaxComp> conserved_totals(const ForestMesh& mesh,
                                              const SolutionField& u) {
  const std::vector<CellId>& act = mesh.active();
  Kahan acc[kMaxComp];
  for (std::size_t s = 0; s < act.size(); ++s) {
    const double h = mesh.cell_volume(act[s]);
    for (int c = 0; c < u.comps; ++c)
      acc[c].add(h * u.data[s * std::size_t(u.comps) + c]);
  }
  std::array<double, kMaxComp> out = {};
  for (int c = 0; c < u.comps; ++c) out[c] = acc[c].sum;
  return out;
}

RunResult run(const RunConfig& cfg, bool write_artifacts) {
  const auto t_begin = clock_type::now();
  RunResult rr;
  rr.cfg = cfg;

  const BenchmarkProblem prob = make_problem(cfg);
  rr.mesh = std::make_shared<ForestMesh>(prob.domain, prob.measure,
                                         cfg.mesh.max_level);
  ForestMesh& mesh = *rr.mesh;
  rr.u = init_field(mesh, prob, cfg.recon.quad_pts);
  SolutionField& u = rr.u;
  const int comps = prob.law.components;

  const AdaptParams ap = adapt_params(cfg);
  AdaptContext ctx;
  StepAudit audit;
  std::vector<LogRow> log;
  const bool adaptive = cfg.mesh.mode == RunMode::adaptive;

  // Let the starting mesh settle on the initial data, re-projecting the
  // closure after every change so the first step sees a proper average of
  // the initial condition rather than an interpolant.
  auto t0 = clock_type::now();
  if (adaptive) {
    for (int it = 0; it < cfg.mesh.max_level + 3; ++it) {
      const std::uint64_t ver = mesh.version();
      adapt_mesh(mesh, prob.law, ap, u, 1.0, ctx);
      if (mesh.version() == ver) break;
      u = init_field(mesh, prob, cfg.recon.quad_pts);
      ctx.stage1_valid = false;
    }
    if (!ctx.stage1_valid) adapt_mesh(mesh, prob.law, ap, u, 1.0, ctx);
  } else {
    ctx.refresh(mesh, cfg.recon.quad_pts);
  }
  rr.totals.wall.adapt += seconds_between(t0, clock_type::now());
  rr.totals.ndof_history.push_back(std::size_t(mesh.n_active()));

  rr.totals.total_initial = conserved_totals(mesh, u);
  double scale = 0.0;
  {
    const std::vector<CellId>& act = mesh.active();
    Kahan l1[kMaxComp];
    for (std::size_t s = 0; s < act.size(); ++s) {
      const double h = mesh.cell_volume(act[s]);
      for (int c = 0; c < comps; ++c)
        l1[c].add(h * std::fabs(u.data[s * std::size_t(comps) + c]));
    }
    for (int c = 0; c < comps; ++c) scale = std::max(scale, l1[c].sum);
    scale = std::max(scale, 1e-300);
  }

  const double t_end = cfg.stepper.t_end;
  double t = 0.0;
  int steps = 0;
  constexpr int kMaxSteps = 2000000;
  try {
    while (t < t_end * (1.0 - 1e-12)) {
      if (steps >= kMaxSteps) {
        rr.aborted = true;
        rr.abort_reason = "step limit reached";
        break;
      }
      AdaptReport rep{};
      if (adaptive && steps > 0) {
        t0 = clock_type::now();
        // Marking compares eta against the budget at the same dt, so the
        // argument cancels; 1.0 makes the logged eta a per-unit-time rate.
        rep = adapt_mesh(mesh, prob.law, ap, u, 1.0, ctx);
        rr.totals.wall.adapt += seconds_between(t0, clock_type::now());
      }
      double cap = t_end - t;
      if (cfg.stepper.dt_cap > 0.0) cap = std::min(cap, cfg.stepper.dt_cap);
      const double dt = compute_dt(mesh, prob.law, u, cfg.stepper.cfl, cap);
      if (!(dt > 0.0) || !std::isfinite(dt)) {
        rr.aborted = true;
        rr.abort_reason = "time step collapsed";
        break;
      }
      t0 = clock_type::now();
      ssp_rk3_step(mesh, ctx.geo, ctx.fq, prob.law, cfg.recon.high,
                   cfg.recon.lim, u, dt, ctx.ws, &audit,
                   (adaptive && ctx.stage1_valid) ? &ctx.stage1 : nullptr);
      rr.totals.wall.assembly += seconds_between(t0, clock_type::now());
      ctx.stage1_valid = false;
      t += dt;
      ++steps;
      rr.totals.ndof_history.push_back(std::size_t(mesh.n_active()));
      log.push_back(LogRow{steps, t, dt, rep.iterations, rep.refined,
                           rep.coarsened, std::size_t(mesh.n_active()),
                           rep.max_eta});
    }
  } catch (const PositivityError& e) {
    rr.aborted = true;
    rr.abort_reason = e.what();
    if (e.cell < mesh.arena_size() && mesh.node(e.cell).active) {
      const Box b = mesh.box(e.cell);
      const CellNode& nd = mesh.node(e.cell);
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    " at t=%.6g cell %u x=[%.6g,%.6g] xi=[%.6g,%.6g] "
                    "level=(%d,%d)",
                    t, e.cell, b.lo[0], b.hi[0], b.lo[1], b.hi[1],
                    int(nd.level[0]), int(nd.level[1]));
      rr.abort_reason += buf;
    }
  }

  rr.totals.steps = steps;
  rr.totals.t_final = t;
  rr.totals.total_final = conserved_totals(mesh, u);
  for (int c = 0; c < comps; ++c)
    rr.totals.drift[c] = rr.totals.total_final[c] - rr.totals.total_initial[c] +
                         audit.boundary[c];
  rr.totals.boundary = audit.boundary;
  double worst = 0.0;
  for (int c = 0; c < comps; ++c)
    worst = std::max(worst, std::fabs(rr.totals.drift[c]));
  rr.totals.drift_rel = worst / scale;
  rr.totals.min_trace_density = audit.min_density;
  rr.totals.min_trace_pressure = audit.min_pressure;

  if (write_artifacts && !cfg.outputs.out_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.outputs.out_dir);
    fs::create_directories(dir);
    t0 = clock_type::now();
    if (!rr.aborted) {
      const FieldStats stats(mesh, u, cfg.recon.high, cfg.recon.lim,
                             cfg.recon.quad_pts);
      {
        std::ofstream os(dir / "moments.csv");
        write_moments_csv(os, stats,
                          uniform_probes(mesh.domain(), cfg.outputs.probes));
      }
      if (!cfg.outputs.pdf_probes.empty()) {
        for (int c = 0; c < comps; ++c) {
          std::ofstream os(dir / ("pdf_c" + std::to_string(c) + ".csv"));
          write_pdf_csv(os, stats, cfg.outputs.pdf_probes, c,
                        cfg.outputs.pdf_samples, cfg.outputs.pdf_grid, 0.0);
        }
      }
    }
    {
      std::ofstream os(dir / "mesh.csv");
      write_mesh_csv(os, mesh, u);
    }
    {
      std::ofstream os(dir / "adapt_log.csv");
      write_adapt_log(os, log);
    }
    rr.totals.wall.stats += seconds_between(t0, clock_type::now());
    rr.totals.wall.total = seconds_between(t_begin, clock_type::now());

    nlohmann::json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["config_hash"] = config_hash(cfg);
    manifest["aborted"] = rr.aborted;
    manifest["abort_reason"] = rr.abort_reason;
    manifest["totals"] = totals_to_json(rr.totals, comps);
    manifest["timestamp"] = timestamp_utc();
    std::ofstream os(dir / "manifest.json");
    os << manifest.dump(2) << '\n';
  } else {
    rr.totals.wall.total = seconds_between(t_begin, clock_type::now());
  }
  return rr;
}

void write_mesh_csv(std::ostream& os, const ForestMesh& mesh,
                    const SolutionField& u) {
  os << "id,ilo_0,ilo_1,level_0,level_1,x_lo,x_hi,y_lo,y_hi,cdf_lo,cdf_hi,"
        "mass,volume";
  for (int c = 0; c < u.comps; ++c) os << ",u_" << c;
  os << '\n';
  const std::vector<CellId>& act = mesh.active();
  for (std::size_t s = 0; s < act.size(); ++s) {
    const CellId c = act[s];
    const CellNode& n = mesh.node(c);
    const Box b = mesh.box(c);
    os << c << ',' << n.ibox.lo[0] << ',' << n.ibox.lo[1] << ','
       << int(n.level[0]) << ',' << int(n.level[1]) << ',' << fmt17(b.lo[0])
       << ',' << fmt17(b.hi[0]) << ',' << fmt17(b.lo[1]) << ','
       << fmt17(b.hi[1]) << ',' << fmt17(mesh.cdf_lo(c, 1)) << ','
       << fmt17(mesh.cdf_hi(c, 1)) << ',' << fmt17(mesh.cell_mass(c)) << ','
       << fmt17(mesh.cell_volume(c));
    for (int k = 0; k < u.comps; ++k)
      os << ',' << fmt17(u.data[s * std::size_t(u.comps) + k]);
    os << '\n';
  }
}

namespace {

struct DumpRow {
  std::int64_t ilo[2];
  int level[2];
  double avg[kMaxComp];
  CellId cell = kInvalidCell;
};

// Recursive partition replay: split `cell` until each dump row owns exactly
// one leaf.  A direction is safe to split when every row under the cell is
// strictly finer there; a valid dyadic partition always offers one.
void replay(ForestMesh& mesh, CellId cell, std::vector<DumpRow*> rows) {
  if (rows.empty())
    throw ConfigError("mesh dump does not cover the domain");
  const CellNode& node = mesh.node(cell);
  if (rows.size() == 1) {
    DumpRow* r = rows.front();
    if (r->ilo[0] == node.ibox.lo[0] && r->ilo[1] == node.ibox.lo[1] &&
        r->level[0] == int(node.level[0]) &&
        r->level[1] == int(node.level[1])) {
      r->cell = cell;
      return;
    }
  }
  int dir = -1;
  for (int d = 0; d < 2 && dir < 0; ++d) {
    bool all_finer = true;
    for (const DumpRow* r : rows)
      if (r->level[d] <= int(node.level[d])) {
        all_finer = false;
        break;
      }
    if (all_finer) dir = d;
  }
  if (dir < 0) throw ConfigError("mesh dump is not a dyadic partition");
  const std::int64_t mid = (node.ibox.lo[dir] + node.ibox.hi[dir]) / 2;
  const std::vector<CellId> kids =
      mesh.refine_cell(cell, std::uint8_t(1u << dir));
  if (kids.size() != 2)
    throw ConfigError("mesh dump exceeds the refinement depth limit");
  std::vector<DumpRow*> lo, hi;
  for (DumpRow* r : rows) (r->ilo[dir] < mid ? lo : hi).push_back(r);
  replay(mesh, kids[0], std::move(lo));
  replay(mesh, kids[1], std::move(hi));
}

}  // namespace

SolutionField load_mesh_csv(std::istream& is, ForestMesh& mesh) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty mesh dump");
  int comps = 0;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ','))
      if (col.rfind("u_", 0) == 0) ++comps;
  }
  if (comps < 1 || comps > kMaxComp)
    throw ConfigError("mesh dump header lists no averages");

  std::vector<DumpRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    if (cols.size() != std::size_t(13 + comps))
      throw ConfigError("mesh dump row has the wrong column count");
    DumpRow r{};
    r.ilo[0] = std::stoll(cols[1]);
    r.ilo[1] = std::stoll(cols[2]);
    r.level[0] = std::stoi(cols[3]);
    r.level[1] = std::stoi(cols[4]);
    for (int c = 0; c < comps; ++c)
      r.avg[c] = std::strtod(cols[std::size_t(13 + c)].c_str(), nullptr);
    rows.push_back(r);
  }
  if (rows.empty()) throw ConfigError("mesh dump has no cells");

  // Group rows under their root cells, then replay the bisections.
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<DumpRow*>>
      by_root;
  for (DumpRow& r : rows) {
    const std::int64_t rx = (r.ilo[0] / kUnitsPerRoot) * kUnitsPerRoot;
    const std::int64_t ry = (r.ilo[1] / kUnitsPerRoot) * kUnitsPerRoot;
    by_root[{rx, ry}].push_back(&r);
  }
  const std::vector<CellId> roots = mesh.active();
  if (mesh.arena_size() != roots.size())
    throw ConfigError("mesh dump must load into a fresh root mesh");
  for (CellId c : roots) {
    const CellNode& n = mesh.node(c);
    auto it = by_root.find({n.ibox.lo[0], n.ibox.lo[1]});
    if (it == by_root.end())
      throw ConfigError("mesh dump misses a root cell");
    replay(mesh, c, std::move(it->second));
    by_root.erase(it);
  }
  if (!by_root.empty())
    throw ConfigError("mesh dump holds cells outside the domain");

  SolutionField out;
  out.comps = comps;
  out.resize_for(mesh);
  for (const DumpRow& r : rows) {
    const std::int32_t slot = mesh.node(r.cell).slot;
    if (r.cell == kInvalidCell || slot < 0)
      throw ConfigError("mesh dump row failed to map to a cell");
    for (int c = 0; c < comps; ++c)
      out.data[std::size_t(slot) * comps + c] = r.avg[c];
  }
  return out;
}

LoadedRun load_run_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  std::ifstream ms(base / "manifest.json");
  if (!ms) throw ConfigError("no manifest.json under '" + dir + "'");
  nlohmann::json manifest = nlohmann::json::parse(ms, nullptr, false);
  if (manifest.is_discarded())
    throw ConfigError("manifest.json under '" + dir + "' is not valid JSON");

  LoadedRun lr;
  lr.cfg = parse_config(manifest.at("config"));
  lr.aborted = manifest.value("aborted", false);
  if (manifest.contains("totals")) totals_from_json(manifest["totals"], lr.totals);

  const BenchmarkProblem prob = make_problem(lr.cfg);
  lr.mesh = std::make_shared<ForestMesh>(prob.domain, prob.measure,
                                         lr.cfg.mesh.max_level);
  std::ifstream cs(base / "mesh.csv");
  if (!cs) throw ConfigError("no mesh.csv under '" + dir + "'");
  lr.u = load_mesh_csv(cs, *lr.mesh);
  if (lr.u.comps != prob.law.components)
    throw ConfigError("mesh.csv component count disagrees with the law");
  return lr;
}

LoadedRun run_cached(const RunConfig& cfg, const std::string& cache_dir) {
  namespace fs = std::filesystem;
  const std::string key = config_hash(cfg);
  const fs::path dir = fs::path(cache_dir) / key;
  if (fs::exists(dir / "manifest.json") && fs::exists(dir / "mesh.csv")) {
    LoadedRun lr = load_run_dir(dir.string());
    if (config_hash(lr.cfg) == key && !lr.aborted) return lr;
  }
  RunConfig c2 = cfg;
  c2.outputs.out_dir = dir.string();
  RunResult rr = run(c2, true);
  LoadedRun lr;
  lr.cfg = rr.cfg;
  lr.mesh = rr.mesh;
  lr.u = std::move(rr.u);
  lr.totals = std::move(rr.totals);
  lr.aborted = rr.aborted;
  return lr;
}

}  // namespace sfv
