#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sfv/runner.hpp"
#include "sfv/statistics.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPositivity = 3;

sfv::RunConfig load_config(const std::string& path,
                           const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw sfv::ConfigError("cannot open config '" + path + "'");
  nlohmann::json doc = nlohmann::json::parse(is, nullptr, false);
  if (doc.is_discarded())
    throw sfv::ConfigError("config '" + path + "' is not valid JSON");
  for (const std::string& o : overrides) sfv::apply_override(doc, o);
  return sfv::parse_config(doc);
}

void print_summary(const sfv::RunResult& rr) {
  const sfv::RunTotals& t = rr.totals;
  std::printf("steps          %d\n", t.steps);
  std::printf("t_final        %.6g\n", t.t_final);
  std::printf("ndofs          %zu\n",
              t.ndof_history.empty() ? std::size_t(0) : t.ndof_history.back());
  std::printf("drift_rel      %.3e\n", t.drift_rel);
  if (rr.cfg.law.kind == sfv::LawKind::euler) {
    std::printf("min trace rho  %.6g\n", t.min_trace_density);
    std::printf("min trace p    %.6g\n", t.min_trace_pressure);
  }
  std::printf("wall           %.2fs (assembly %.2fs, adapt %.2fs, stats %.2fs)\n",
              t.wall.total, t.wall.assembly, t.wall.adapt, t.wall.stats);
}

// Least-squares slope of log(e) against log(n).
double fit_slope(const std::vector<double>& n, const std::vector<double>& e) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(e[i] > 0) || !(n[i] > 0)) continue;
    const double x = std::log(n[i]), y = std::log(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) return 0.0;
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::vector<std::string>& overrides) {
  sfv::RunConfig cfg = load_config(config_path, overrides);
  if (!out_dir.empty()) cfg.outputs.out_dir = out_dir;
  const sfv::RunResult rr = sfv::run(cfg, true);
  print_summary(rr);
  if (rr.aborted) {
    std::fprintf(stderr, "run aborted: %s\n", rr.abort_reason.c_str());
    return rr.abort_reason.find("positivity") != std::string::npos
               ? kExitPositivity
               : 1;
  }
  return 0;
}

int cmd_converge(const std::vector<std::string>& configs,
                 const std::string& reference, const std::string& out_dir,
                 const std::vector<std::string>& overrides) {
  if (configs.empty()) throw sfv::ConfigError("no run configs given");

  // Reference side: a finished run directory, or the closed-form solution.
  const bool exact_ref = reference == "exact";
  sfv::LoadedRun ref;
  if (!exact_ref) ref = sfv::load_run_dir(reference);

  std::filesystem::create_directories(out_dir);
  std::ofstream table(std::filesystem::path(out_dir) / "convergence.csv");
  table << "run,ndofs,delta_x";
  for (const char* m : {"mean", "var", "pdf"})
    for (int c = 0; c < sfv::kMaxComp; ++c) table << ",e_" << m << "_" << c;
  table << '\n';

  std::vector<double> ndofs, deltas, e_mean0;
  for (const std::string& path : configs) {
    sfv::RunConfig cfg = load_config(path, overrides);
    const sfv::LoadedRun run = sfv::run_cached(cfg, out_dir);
    if (run.aborted) throw sfv::ConfigError("run for '" + path + "' aborted");

    const std::vector<double> probes =
        sfv::uniform_probes(run.mesh->domain(), cfg.outputs.probes);
    sfv::L1Params prm;
    prm.n_samples = cfg.outputs.pdf_samples;
    prm.grid = cfg.outputs.pdf_grid;
    prm.kind = cfg.recon.high;
    prm.lim = cfg.recon.lim;

    sfv::L1Errors err;
    if (exact_ref) {
      const sfv::BenchmarkProblem prob = sfv::make_problem(cfg);
      const sfv::SolutionField ue = sfv::exact_average_field(
          *run.mesh, prob, cfg.stepper.t_end, cfg.recon.quad_pts);
      err = sfv::l1_errors(*run.mesh, run.u, *run.mesh, ue, probes, prm);
    } else {
      err = sfv::l1_errors(*run.mesh, run.u, *ref.mesh, ref.u, probes, prm);
    }

    const std::size_t nd = run.totals.ndof_history.empty()
                               ? std::size_t(run.mesh->n_active())
                               : run.totals.ndof_history.back();
    const double dx = (cfg.domain.x_hi - cfg.domain.x_lo) /
                      cfg.mesh.cells_per_dim;
    table << sfv::config_hash(cfg) << ',' << nd << ',' << dx;
    char buf[32];
    for (const auto& m : {err.mean, err.var, err.pdf})
      for (int c = 0; c < sfv::kMaxComp; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", m[c]);
        table << ',' << buf;
      }
    table << '\n';
    std::printf("%s  ndofs=%zu  dx=%.4g  e_mean=%.4e  e_var=%.4e  e_pdf=%.4e\n",
                path.c_str(), nd, dx, err.mean[0], err.var[0], err.pdf[0]);
    ndofs.push_back(double(nd));
    deltas.push_back(dx);
    e_mean0.push_back(err.mean[0]);
  }
  if (ndofs.size() >= 2) {
    std::printf("slope e_mean vs NDoFs: %.3f\n",
                -fit_slope(ndofs, e_mean0));
    std::printf("slope e_mean vs dx:    %.3f\n", fit_slope(deltas, e_mean0));
  }
  return 0;
}

int cmd_mesh_dump(const std::string& rundir) {
  const sfv::LoadedRun lr = sfv::load_run_dir(rundir);
  sfv::write_mesh_csv(std::cout, *lr.mesh, lr.u);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive stochastic finite volume solver"};
  app.require_subcommand(1);

  std::string config_path, out_dir, reference, rundir;
  std::vector<std::string> overrides, configs;

  CLI::App* runc = app.add_subcommand("run", "advance one configured run");
  runc->add_option("config", config_path, "JSON run configuration")
      ->required();
  runc->add_option("--out", out_dir, "output directory (overrides config)");
  runc->add_option("--override", overrides,
                   "dotted key=value applied to the config");

  CLI::App* conv =
      app.add_subcommand("converge", "error table across finished runs");
  conv->add_option("configs", configs, "run configuration files")->required();
  conv->add_option("--reference", reference,
                   "'exact' or a finished run directory")
      ->required();
  conv->add_option("--out", out_dir, "work directory for runs and the table")
      ->default_val("converge_out");
  conv->add_option("--override", overrides,
                   "dotted key=value applied to every config");

  CLI::App* dump =
      app.add_subcommand("mesh-dump", "print the cell table of a run");
  dump->add_option("rundir", rundir, "finished run directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (runc->parsed()) return cmd_run(config_path, out_dir, overrides);
    if (conv->parsed())
      return cmd_converge(configs, reference, out_dir, overrides);
    return cmd_mesh_dump(rundir);
  } catch (const sfv::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const sfv::PositivityError& e) {
    std::fprintf(stderr, "positivity abort: %s\n", e.what());
    return kExitPositivity;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
