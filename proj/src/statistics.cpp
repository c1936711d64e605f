#include "sfv/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace sfv {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Nudge a probe off any active-cell interface; +1e-14 of the domain width per
// the interface rule, flipped inward when that would leave the domain.
double nudged_probe(const ForestMesh& mesh, double x) {
  const DomainSpec& dom = mesh.domain();
  const std::vector<CellId>& act = mesh.active();
  bool on_interface = false;
  for (CellId c : act) {
    const Box b = mesh.box(c);
    if (b.lo[0] == x || b.hi[0] == x) {
      on_interface = true;
      break;
    }
  }
  if (!on_interface) return x;
  double shifted = x + 1e-14 * dom.width(0);
  if (shifted >= dom.hi[0]) shifted = x - 1e-14 * dom.width(0);
  return shifted;
}

double interp_quantile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * double(n - 1);
  const std::size_t i = std::size_t(std::min(pos, double(n - 2)));
  const double frac = pos - double(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

void fmt17(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

StochasticColumn column(const ForestMesh& mesh, double x) {
  if (mesh.domain().n_physical != 1)
    throw std::logic_error("column probes require one physical direction");
  StochasticColumn col;
  col.x = nudged_probe(mesh, x);
  const std::vector<CellId>& act = mesh.active();
  for (CellId c : act) {
    const Box b = mesh.box(c);
    if (b.lo[0] < col.x && col.x < b.hi[0]) col.cells.push_back(c);
  }
  const int nd = mesh.ndim();
  std::sort(col.cells.begin(), col.cells.end(), [&](CellId a, CellId b) {
    const IntBox& ia = mesh.node(a).ibox;
    const IntBox& ib = mesh.node(b).ibox;
    for (int d = 1; d < nd; ++d)
      if (ia.lo[d] != ib.lo[d]) return ia.lo[d] < ib.lo[d];
    return a < b;
  });
  col.mass.reserve(col.cells.size());
  for (CellId c : col.cells) col.mass.push_back(mesh.cell_mass(c));
  return col;
}

double StepCdf::operator()(double g) const {
  double f = 0.0;
  for (std::size_t i = 0; i < value.size() && value[i] <= g; ++i) f += mass[i];
  return f;
}

double StepCdf::quantile(double q) const {
  double f = 0.0;
  for (std::size_t i = 0; i < value.size(); ++i) {
    f += mass[i];
    if (f >= q) return value[i];
  }
  return value.back();
}

double cdf_l1(const StepCdf& a, const StepCdf& b) {
  std::size_t ia = 0, ib = 0;
  double fa = 0.0, fb = 0.0, acc = 0.0;
  double prev = 0.0;
  bool have_prev = false;
  while (ia < a.value.size() || ib < b.value.size()) {
    double v;
    if (ib >= b.value.size() || (ia < a.value.size() && a.value[ia] <= b.value[ib]))
      v = a.value[ia];
    else
      v = b.value[ib];
    if (have_prev) acc += std::abs(fa - fb) * (v - prev);
    while (ia < a.value.size() && a.value[ia] == v) fa += a.mass[ia++];
    while (ib < b.value.size() && b.value[ib] == v) fb += b.mass[ib++];
    prev = v;
    have_prev = true;
  }
  return acc;
}

double silverman_bandwidth(const std::vector<double>& s) {
  const std::size_t n = s.size();
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= double(n);
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  const double sigma = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
  std::vector<double> sorted(s);
  std::sort(sorted.begin(), sorted.end());
  const double iqr =
      interp_quantile(sorted, 0.75) - interp_quantile(sorted, 0.25);
  const double spread = std::min(sigma, iqr / 1.34);
  const double h = 0.9 * spread * std::pow(double(n), -0.2);
  return std::max(h, 1e-8 * (1.0 + std::abs(mean)));
}

double kde_eval(const std::vector<double>& sorted_samples, double h, double v) {
  // Kernel tails beyond 8.5 sigma are below double rounding; the cutoff keeps
  // the evaluation deterministic while pruning the sum.
  const double cut = 8.5 * h;
  auto lo = std::lower_bound(sorted_samples.begin(), sorted_samples.end(),
                             v - cut);
  auto hi = std::upper_bound(lo, sorted_samples.end(), v + cut);
  double acc = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (v - *it) / h;
    acc += std::exp(-0.5 * z * z);
  }
  return acc * kInvSqrt2Pi / (double(sorted_samples.size()) * h);
}

FieldStats::FieldStats(const ForestMesh& mesh, const SolutionField& u,
                       ReconKind kind, Limiter lim, int quad_pts)
    : mesh_(mesh), kind_(kind), comps_(u.comps), quad_pts_(quad_pts),
      u_(u.data) {
  if (u.data.size() != std::size_t(mesh.n_active()) * std::size_t(u.comps))
    throw std::logic_error("field does not match the mesh");
  build_patch_geometry(mesh, geo_);
  fill_patch_values(mesh, geo_, u_.data(), comps_, lim, vals_);
}

StochasticColumn FieldStats::column(double x) const {
  return sfv::column(mesh_, x);
}

void FieldStats::moments(const StochasticColumn& col, double* mean,
                         double* var) const {
  const int nd = mesh_.ndim();
  const int nsd = nd - 1;
  std::array<double, kMaxComp> m1{}, m2{};
  std::array<double, kMaxComp> pt;
  std::array<double, kMaxDim> xi;
  xi[0] = col.x;
  for (CellId c : col.cells) {
    const std::int32_t slot = mesh_.node(c).slot;
    std::vector<QuadratureRule> rules;
    rules.reserve(nsd);
    for (int d = 1; d < nd; ++d)
      rules.push_back(
          lobatto_rule(mesh_.cdf_lo(c, d), mesh_.cdf_hi(c, d), quad_pts_));
    std::array<int, kMaxDim> idx{};
    for (;;) {
      double w = 1.0;
      for (int d = 0; d < nsd; ++d) {
        xi[1 + d] = rules[d].nodes[idx[d]];
        w *= rules[d].weights[idx[d]];
      }
      reconstruct_point(mesh_, geo_, vals_, slot, kind_, xi.data(), pt.data());
      for (int k = 0; k < comps_; ++k) {
        m1[k] += w * pt[k];
        m2[k] += w * pt[k] * pt[k];
      }
      int d = 0;
      while (d < nsd && ++idx[d] == quad_pts_) idx[d++] = 0;
      if (d == nsd) break;
    }
  }
  for (int k = 0; k < comps_; ++k) {
    mean[k] = m1[k];
    var[k] = std::max(0.0, m2[k] - m1[k] * m1[k]);
  }
}

StepCdf FieldStats::step_cdf(const StochasticColumn& col, int comp) const {
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(col.cells.size());
  for (std::size_t i = 0; i < col.cells.size(); ++i) {
    const std::int32_t slot = mesh_.node(col.cells[i]).slot;
    atoms.emplace_back(u_[std::size_t(slot) * comps_ + comp], col.mass[i]);
  }
  std::sort(atoms.begin(), atoms.end());
  StepCdf f;
  for (const auto& [v, m] : atoms) {
    if (!f.value.empty() && f.value.back() == v)
      f.mass.back() += m;
    else {
      f.value.push_back(v);
      f.mass.push_back(m);
    }
  }
  return f;
}

double FieldStats::cdf(const StochasticColumn& col, int comp, double g) const {
  const StepCdf f = step_cdf(col, comp);
  return f(g);
}

double FieldStats::quantile(const StochasticColumn& col, int comp,
                            double q) const {
  const StepCdf f = step_cdf(col, comp);
  return f.quantile(q);
}

int FieldStats::locate(const StochasticColumn& col, const double* xi) const {
  const int nd = mesh_.ndim();
  for (std::size_t i = 0; i < col.cells.size(); ++i) {
    const CellId c = col.cells[i];
    bool in = true;
    for (int d = 1; d < nd && in; ++d)
      in = mesh_.cdf_lo(c, d) <= xi[d] && xi[d] < mesh_.cdf_hi(c, d);
    if (in) return int(i);
  }
  return int(col.cells.size()) - 1;
}

std::vector<double> FieldStats::sample_values(const StochasticColumn& col,
                                              int comp, int n) const {
  const int nd = mesh_.ndim();
  std::array<double, kMaxDim> xi;
  std::array<double, kMaxComp> pt;
  xi[0] = col.x;
  std::vector<double> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    xi[1] = (double(i) + 0.5) / double(n);
    for (int d = 2; d < nd; ++d) {
      // van der Corput radical inverse, base 3 then 5.
      const int base = d == 2 ? 3 : 5;
      double f = 1.0, r = 0.0;
      for (int k = i + 1; k > 0; k /= base) {
        f /= double(base);
        r += f * double(k % base);
      }
      xi[d] = r;
    }
    const int j = locate(col, xi.data());
    const std::int32_t slot = mesh_.node(col.cells[j]).slot;
    reconstruct_point(mesh_, geo_, vals_, slot, kind_, xi.data(), pt.data());
    out.push_back(pt[comp]);
  }
  return out;
}

DensityEstimate FieldStats::pdf_kde(const StochasticColumn& col, int comp,
                                    int n, double h, int grid) const {
  DensityEstimate de;
  de.n = n;
  de.samples = sample_values(col, comp, n);
  std::sort(de.samples.begin(), de.samples.end());
  de.bandwidth = h > 0.0 ? h : silverman_bandwidth(de.samples);
  const double lo = de.samples.front() - 5.0 * de.bandwidth;
  const double hi = de.samples.back() + 5.0 * de.bandwidth;
  de.grid.resize(grid);
  de.density.resize(grid);
  for (int i = 0; i < grid; ++i) {
    de.grid[i] = lo + (hi - lo) * double(i) / double(grid - 1);
    de.density[i] = kde_eval(de.samples, de.bandwidth, de.grid[i]);
  }
  return de;
}

L1Errors l1_errors(const ForestMesh& mesh_a, const SolutionField& ua,
                   const ForestMesh& mesh_b, const SolutionField& ub,
                   const std::vector<double>& x_samples, const L1Params& prm) {
  const FieldStats fa(mesh_a, ua, prm.kind, prm.lim);
  const FieldStats fb(mesh_b, ub, prm.kind, prm.lim);
  const int comps = std::min(fa.comps(), fb.comps());
  const std::vector<double> w = trapezoid_weights(x_samples);
  const int np = int(x_samples.size());
  std::vector<std::array<double, kMaxComp>> dm(np), dv(np), dp(np);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < np; ++i) {
    const StochasticColumn ca = fa.column(x_samples[i]);
    const StochasticColumn cb = fb.column(x_samples[i]);
    std::array<double, kMaxComp> ma, va, mb, vb;
    fa.moments(ca, ma.data(), va.data());
    fb.moments(cb, mb.data(), vb.data());
    for (int k = 0; k < comps; ++k) {
      dm[i][k] = std::abs(ma[k] - mb[k]);
      dv[i][k] = std::abs(va[k] - vb[k]);
      std::vector<double> sa = fa.sample_values(ca, k, prm.n_samples);
      std::vector<double> sb = fb.sample_values(cb, k, prm.n_samples);
      std::sort(sa.begin(), sa.end());
      std::sort(sb.begin(), sb.end());
      const double h = silverman_bandwidth(sb);
      const double lo = std::min(sa.front(), sb.front()) - 5.0 * h;
      const double hi = std::max(sa.back(), sb.back()) + 5.0 * h;
      double acc = 0.0, prev = 0.0;
      for (int g = 0; g < prm.grid; ++g) {
        const double v = lo + (hi - lo) * double(g) / double(prm.grid - 1);
        const double d = std::abs(kde_eval(sa, h, v) - kde_eval(sb, h, v));
        if (g > 0) acc += 0.5 * (d + prev) * (hi - lo) / double(prm.grid - 1);
        prev = d;
      }
      dp[i][k] = acc;
    }
  }

  L1Errors out;
  for (int i = 0; i < np; ++i)
    for (int k = 0; k < comps; ++k) {
      out.mean[k] += w[i] * dm[i][k];
      out.var[k] += w[i] * dv[i][k];
      out.pdf[k] += w[i] * dp[i][k];
    }
  return out;
}

std::vector<double> uniform_probes(const DomainSpec& dom, int n) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i)
    x[i] = dom.lo[0] + dom.width(0) * double(i) / double(n - 1);
  return x;
}

std::vector<double> trapezoid_weights(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double half = 0.5 * (x[i + 1] - x[i]);
    w[i] += half;
    w[i + 1] += half;
  }
  return w;
}

void write_moments_csv(std::ostream& os, const FieldStats& fs,
                       const std::vector<double>& probes) {
  os << "x";
  for (int k = 0; k < fs.comps(); ++k)
    os << ",mean_" << k << ",var_" << k << ",q25_" << k << ",q75_" << k;
  os << "\n";
  std::array<double, kMaxComp> mean, var;
  for (double x : probes) {
    const StochasticColumn col = fs.column(x);
    fs.moments(col, mean.data(), var.data());
    fmt17(os, x);
    for (int k = 0; k < fs.comps(); ++k) {
      const StepCdf f = fs.step_cdf(col, k);
      os << ',';
      fmt17(os, mean[k]);
      os << ',';
      fmt17(os, var[k]);
      os << ',';
      fmt17(os, f.quantile(0.25));
      os << ',';
      fmt17(os, f.quantile(0.75));
    }
    os << "\n";
  }
}

void write_pdf_csv(std::ostream& os, const FieldStats& fs,
                   const std::vector<double>& probes, int comp, int n_samples,
                   int grid, double h) {
  os << "x,v,density\n";
  for (double x : probes) {
    const StochasticColumn col = fs.column(x);
    const DensityEstimate de = fs.pdf_kde(col, comp, n_samples, h, grid);
    for (std::size_t i = 0; i < de.grid.size(); ++i) {
      fmt17(os, x);
      os << ',';
      fmt17(os, de.grid[i]);
      os << ',';
      fmt17(os, de.density[i]);
      os << "\n";
    }
  }
}

}  // namespace sfv
