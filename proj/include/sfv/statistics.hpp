#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "sfv/field.hpp"
#include "sfv/forest_mesh.hpp"
#include "sfv/reconstruction.hpp"

namespace sfv {

// The active cells covering one physical location form a partition of the
// stochastic domain.  Slabs are ordered by stochastic coordinate; masses come
// from the per-cell measure cache and sum to 1.
struct StochasticColumn {
  double x = 0.0;  // probe location, nudged off cell interfaces
  std::vector<CellId> cells;
  std::vector<double> mass;
};

StochasticColumn column(const ForestMesh& mesh, double x);

// Step distribution of the cell averages in a column: atom values ascending,
// equal values merged.
struct StepCdf {
  std::vector<double> value;
  std::vector<double> mass;

  double operator()(double g) const;  // right-continuous, limits 0 and 1
  double quantile(double q) const;    // smallest value with cdf >= q
};

// Exact L1 distance between two step CDFs by sweeping merged breakpoints.
double cdf_l1(const StepCdf& a, const StepCdf& b);

// Gaussian kernel density estimate of the push-forward law at one probe.
// Samples are retained so error metrics can re-evaluate the mixture on a
// shared grid.
struct DensityEstimate {
  std::vector<double> grid;  // solution values, ascending
  std::vector<double> density;
  int n = 0;
  double bandwidth = 0.0;
  std::vector<double> samples;  // sorted
};

// Silverman's rule on a sample, floored so degenerate data still yields a
// usable (narrow) kernel.
double silverman_bandwidth(const std::vector<double>& s);

// Mixture density at v; samples must be sorted ascending.
double kde_eval(const std::vector<double>& sorted_samples, double h, double v);

// Post-processing engine over an immutable (mesh, field) snapshot.  The patch
// fill happens once in the constructor; every probe query reuses it, so
// sweeping many probes stays cheap.
class FieldStats {
 public:
  FieldStats(const ForestMesh& mesh, const SolutionField& u,
             ReconKind kind = ReconKind::weno5,
             Limiter lim = Limiter::minmod, int quad_pts = 6);

  const ForestMesh& mesh() const { return mesh_; }
  int comps() const { return comps_; }

  StochasticColumn column(double x) const;

  // Slab-by-slab quadrature of reconstructed point values at (x, y-nodes),
  // weighted by the measure.  Variance is floored at zero.  mean and var
  // receive comps() entries each.
  void moments(const StochasticColumn& col, double* mean, double* var) const;

  StepCdf step_cdf(const StochasticColumn& col, int comp) const;
  double cdf(const StochasticColumn& col, int comp, double g) const;
  double quantile(const StochasticColumn& col, int comp, double q) const;

  // Reconstructed values at n stratified stochastic points.  The sequence is
  // deterministic (midpoint stratification in the first stochastic direction,
  // van der Corput in the others), so repeated calls are bit-identical and
  // different fields sample the same points.  Working coordinates make the
  // inverse-CDF map implicit: a uniform draw in CDF space is a measure draw.
  std::vector<double> sample_values(const StochasticColumn& col, int comp,
                                    int n) const;

  // Push-forward density at the probe; h == 0 selects Silverman's rule, the
  // grid spans the sample range +- 5h.
  DensityEstimate pdf_kde(const StochasticColumn& col, int comp, int n = 4096,
                          double h = 0.0, int grid = 512) const;

 private:
  int locate(const StochasticColumn& col, const double* xi) const;

  const ForestMesh& mesh_;
  ReconKind kind_;
  int comps_ = 1;
  int quad_pts_ = 6;
  std::vector<double> u_;  // raw averages, kept for the step-CDF atoms
  PatchGeometry geo_;
  PatchValues vals_;
};

// L1 differences between two runs of the same problem: composite-trapezoid
// x-integration over the probe set of |d mean|, |d var|, and the value-grid
// integral of the KDE difference.  The reference (b) side fixes the per-probe
// bandwidth so both densities are smoothed identically; the value grid spans
// the union sample range +- 5h.
struct L1Params {
  int n_samples = 4096;
  int grid = 512;
  ReconKind kind = ReconKind::weno5;
  Limiter lim = Limiter::minmod;
};

struct L1Errors {
  std::array<double, kMaxComp> mean{};
  std::array<double, kMaxComp> var{};
  std::array<double, kMaxComp> pdf{};
};

L1Errors l1_errors(const ForestMesh& mesh_a, const SolutionField& ua,
                   const ForestMesh& mesh_b, const SolutionField& ub,
                   const std::vector<double>& x_samples,
                   const L1Params& prm = {});

// n uniform probes spanning the physical extent, endpoints included; the
// interface nudge in column() keeps them off cell boundaries.
std::vector<double> uniform_probes(const DomainSpec& dom, int n);

// Composite-trapezoid weights for an ascending probe set.
std::vector<double> trapezoid_weights(const std::vector<double>& x);

// CSV emitters, 17 significant digits.
// Moments: x, then mean/var/q25/q75 per component.
void write_moments_csv(std::ostream& os, const FieldStats& fs,
                       const std::vector<double>& probes);
// Density: x, v, density for one component.
void write_pdf_csv(std::ostream& os, const FieldStats& fs,
                   const std::vector<double>& probes, int comp,
                   int n_samples = 4096, int grid = 512, double h = 0.0);

}  // namespace sfv
