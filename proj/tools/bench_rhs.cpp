#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "sfv/adaptivity.hpp"
#include "sfv/problems.hpp"

using namespace sfv;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Median-of-repeats wall time of one callable.
template <class F>
double time_best(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_seconds();
    f();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cached parallel assembly vs the serial reference path"};
  int n = 64;
  int reps = 3;
  std::string problem = "burgers_sine";
  app.add_option("--cells", n, "root cells per direction")->default_val(64);
  app.add_option("--reps", reps, "timing repetitions")->default_val(3);
  app.add_option("--problem", problem, "benchmark id")
      ->default_val("burgers_sine");
  CLI11_PARSE(app, argc, argv);

  nlohmann::json doc;
  doc["problem"] = problem;
  doc["mesh"] = {{"cells_per_dim", n}, {"mode", "uniform"}};
  RunConfig cfg = parse_config(doc);
  const BenchmarkProblem prob = make_problem(cfg);
  ForestMesh mesh(prob.domain, prob.measure, cfg.mesh.max_level);
  const SolutionField u = init_field(mesh, prob, cfg.recon.quad_pts);

  PatchGeometry geo;
  FaceQuadCache fq;
  RhsWorkspace ws;
  const double t_geo =
      time_best(reps, [&] { build_patch_geometry(mesh, geo); });
  const double t_fq =
      time_best(reps, [&] { fq.build(mesh, cfg.recon.quad_pts); });

  SolutionField r_par, r_ser;
  const double t_par = time_best(reps, [&] {
    compute_rhs(mesh, geo, fq, prob.law, cfg.recon.high, cfg.recon.lim, u,
                r_par, ws);
  });
  const double t_ser = time_best(reps, [&] {
    compute_rhs_reference(mesh, prob.law, cfg.recon.high, cfg.recon.lim, u,
                          r_ser, cfg.recon.quad_pts);
  });

  double worst = 0.0;
  for (std::size_t i = 0; i < r_par.data.size(); ++i)
    worst = std::max(worst, std::fabs(r_par.data[i] - r_ser.data[i]));

  std::printf("%s %dx%d, %d cells\n", problem.c_str(), n, n, mesh.n_active());
  std::printf("geometry build   %8.2f ms\n", 1e3 * t_geo);
  std::printf("face quadrature  %8.2f ms\n", 1e3 * t_fq);
  std::printf("rhs cached       %8.2f ms\n", 1e3 * t_par);
  std::printf("rhs reference    %8.2f ms\n", 1e3 * t_ser);
  std::printf("speedup          %8.2fx\n", t_ser / t_par);
  std::printf("max |difference| %8.2e\n", worst);
  return worst < 1e-11 ? 0 : 1;
}
