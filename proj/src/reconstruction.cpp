#include "sfv/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace sfv {

namespace {

constexpr double kWenoEps = 1e-6;

// Invert a small matrix in place into `inv` (partial pivoting; n <= 5).
void invert_small(double a[5][5], int n, double inv[5][5]) {
  double w[5][10];
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      w[r][c] = a[r][c];
      w[r][n + c] = (r == c) ? 1.0 : 0.0;
    }
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(w[r][col]) > std::abs(w[piv][col])) piv = r;
    if (piv != col)
      for (int c = 0; c < 2 * n; ++c) std::swap(w[col][c], w[piv][c]);
    double d = w[col][col];
    if (d == 0.0) throw std::logic_error("reconstruction: singular window matrix");
    for (int c = 0; c < 2 * n; ++c) w[col][c] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = w[r][col];
      if (f == 0.0) continue;
      for (int c = 0; c < 2 * n; ++c) w[r][c] -= f * w[col][c];
    }
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) inv[r][c] = w[r][n + c];
}

// Average-consistency matrix of one candidate: row r expresses the average of
// the polynomial over window cell sub+r in terms of zeta-monomial
// coefficients.
void candidate_matrix(const double* Z, int sub, int len, double out_inv[5][5]) {
  double A[5][5];
  for (int r = 0; r < len; ++r) {
    double zl = Z[sub + r], zh = Z[sub + r + 1];
    double dz = zh - zl;
    double pl = zl, ph = zh;
    for (int m = 0; m < len; ++m) {
      A[r][m] = (ph - pl) / (double(m + 1) * dz);
      pl *= zl;
      ph *= zh;
    }
  }
  invert_small(A, len, out_inv);
}

// Integral of zeta^k over [-1/2, 1/2].
double cell_moment(int k) {
  if (k & 1) return 0.0;
  return std::ldexp(1.0, -k) / double(k + 1);
}

// Jiang-Shu smoothness of a polynomial given by zeta-monomial coefficients:
// sum over derivative orders of the squared L2 norm on the unit cell.
double poly_beta(const double* c, int deg) {
  double beta = 0.0;
  for (int m = 1; m <= deg; ++m) {
    double d[5];
    int nd = deg - m + 1;
    for (int i = 0; i < nd; ++i) {
      double f = 1.0;
      for (int k = 0; k < m; ++k) f *= double(i + m - k);
      d[i] = c[i + m] * f;
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) beta += d[i] * d[j] * cell_moment(i + j);
  }
  return beta;
}

}  // namespace

int recon_order(ReconKind k) {
  switch (k) {
    case ReconKind::p0: return 1;
    case ReconKind::weno3: return 3;
    case ReconKind::weno5: return 5;
  }
  return 1;
}

double smoothness_beta(double um, double u0, double up) {
  double a = um - 2.0 * u0 + up;
  double b = um - up;
  return (13.0 / 12.0) * a * a + 0.25 * b * b;
}

double apply_limiter(Limiter lim, double s_minus, double s_plus) {
  if (s_minus * s_plus <= 0.0) return 0.0;
  if (lim == Limiter::minmod)
    return (s_minus > 0.0) ? std::min(s_minus, s_plus)
                           : std::max(s_minus, s_plus);
  return 2.0 * s_minus * s_plus / (s_minus + s_plus);
}

void build_candidates(ReconKind kind, int n, int t, const double* edges,
                      CandGeom& cg) {
  if (n < 1 || t < 0 || t >= n)
    throw std::logic_error("build_candidates: bad window");
  cg = CandGeom{};
  cg.n = n;
  cg.t = t;

  double wt = edges[t + 1] - edges[t];
  double mid = 0.5 * (edges[t] + edges[t + 1]);
  double Z[6];
  for (int j = 0; j <= n; ++j) Z[j] = (edges[j] - mid) / wt;

  auto add = [&](int sub, int len) {
    int k = cg.ncand++;
    cg.sub[k] = sub;
    cg.len[k] = len;
    double inv[5][5];
    candidate_matrix(Z, sub, len, inv);
    for (int r = 0; r < len; ++r)
      for (int c = 0; c < len; ++c) cg.mat[k][r * len + c] = inv[r][c];
  };

  if (kind == ReconKind::p0) {
    add(t, 1);
    cg.gamma[0] = 1.0;
    return;
  }

  int i0 = 0, m = n;
  if (kind == ReconKind::weno3) {
    m = std::min(n, 3);
    i0 = std::clamp(t - 1, 0, n - m);
  }
  int cand_len = (kind == ReconKind::weno3) ? 2 : 3;
  int tt = t - i0;
  if (m > cand_len) {
    int s_lo = std::max(0, tt - (cand_len - 1));
    int s_hi = std::min(m - cand_len, tt);
    for (int s = s_lo; s <= s_hi; ++s) add(i0 + s, cand_len);
  }
  int nlat = cg.ncand;
  add(i0, m);  // central full-window candidate, always last
  if (nlat == 0) {
    cg.gamma[0] = 1.0;
  } else {
    for (int k = 0; k < nlat; ++k) cg.gamma[k] = 0.5 / double(nlat);
    cg.gamma[nlat] = 0.5;
  }
}

const CandGeom& uniform_candidates(ReconKind kind, int n, int t) {
  struct Tables {
    CandGeom cg[3][6][5];
    Tables() {
      double edges[6] = {0, 1, 2, 3, 4, 5};
      for (int k = 0; k < 3; ++k)
        for (int nn = 1; nn <= 5; ++nn)
          for (int tt = 0; tt < nn; ++tt)
            build_candidates(ReconKind(k), nn, tt, edges, cg[k][nn][tt]);
    }
  };
  static const Tables tables;
  return tables.cg[int(kind)][n][t];
}

void build_line(const CandGeom& cg, const double* avg, double zmid,
                double zwidth, LineRecon& out) {
  out = LineRecon{};
  out.zmid = zmid;
  out.zwidth = zwidth;

  double coeff[4][5];
  for (int k = 0; k < cg.ncand; ++k) {
    int len = cg.len[k];
    for (int r = 0; r < len; ++r) {
      double acc = 0.0;
      const double* row = &cg.mat[k][r * len];
      for (int c = 0; c < len; ++c) acc += row[c] * avg[cg.sub[k] + c];
      coeff[k][r] = acc;
    }
    for (int r = len; r < 5; ++r) coeff[k][r] = 0.0;
  }

  int C = cg.ncand - 1;
  int deg = cg.len[C] - 1;
  out.deg = deg;
  if (cg.ncand == 1) {
    for (int r = 0; r <= deg; ++r) out.coeff[r] = coeff[0][r];
    return;
  }

  // Central candidate: remove the lateral shares from the full-window fit so
  // that the ideal-weight combination reproduces it exactly.
  double qc[5];
  for (int r = 0; r < 5; ++r) {
    double acc = coeff[C][r];
    for (int k = 0; k < C; ++k) acc -= cg.gamma[k] * coeff[k][r];
    qc[r] = acc / cg.gamma[C];
  }

  double alpha[4], asum = 0.0;
  for (int k = 0; k < C; ++k) {
    double b = poly_beta(coeff[k], cg.len[k] - 1);
    double a = cg.gamma[k] / ((kWenoEps + b) * (kWenoEps + b));
    alpha[k] = a;
    asum += a;
  }
  {
    double b = poly_beta(qc, deg);
    double a = cg.gamma[C] / ((kWenoEps + b) * (kWenoEps + b));
    alpha[C] = a;
    asum += a;
  }
  for (int r = 0; r <= deg; ++r) {
    double acc = alpha[C] * qc[r];
    for (int k = 0; k < C; ++k) acc += alpha[k] * coeff[k][r];
    out.coeff[r] = acc / asum;
  }
}

void build_line(ReconKind kind, int n, int t, const double* edges,
                const double* avg, LineRecon& out) {
  CandGeom cg;
  build_candidates(kind, n, t, edges, cg);
  build_line(cg, avg, 0.5 * (edges[t] + edges[t + 1]), edges[t + 1] - edges[t],
             out);
}

// ---------------------------------------------------------------------------
// Patch geometry.
// ---------------------------------------------------------------------------

namespace {

// Per-cell window description plus donor lists, the unit of work shared by
// the cached geometry builder and the direct reference path.
struct CellWindows {
  int ndim = 0, npatch = 0;
  int wn[kMaxDim] = {1, 1, 1, 1};
  int wt[kMaxDim] = {0, 0, 0, 0};
  double edges[kMaxDim][6];
  bool uniform[kMaxDim] = {};
  std::vector<std::int32_t> donor_begin;    // npatch + 1
  std::vector<CellId> donor_cell;
  std::vector<double> donor_wval;
  std::vector<std::array<double, kMaxDim>> donor_wgrad;
};

void gather_cell_windows(const ForestMesh& mesh, CellId cell, CellWindows& cw) {
  const DomainSpec& dom = mesh.domain();
  const CellNode& node = mesh.node(cell);
  const int nd = dom.ndim();
  cw.ndim = nd;
  cw.npatch = 1;
  for (int d = 0; d < nd; ++d) cw.npatch *= 5;

  // Window index ranges at the cell's own level per direction.  Physical
  // windows stay centered (wrapping or clamping at the boundary); stochastic
  // windows shift inward so every entry is a real slab.
  std::int64_t len[kMaxDim], nlev[kMaxDim], first[kMaxDim];
  for (int d = 0; d < nd; ++d) {
    len[d] = kUnitsPerRoot >> node.level[d];
    nlev[d] = std::int64_t(dom.root_cells[d]) << node.level[d];
    std::int64_t idx = node.ibox.lo[d] / len[d];
    if (dom.is_physical(d)) {
      cw.wn[d] = 5;
      cw.wt[d] = 2;
      first[d] = idx - 2;
    } else {
      std::int64_t start = std::clamp<std::int64_t>(idx - 2, 0,
                                                    std::max<std::int64_t>(0, nlev[d] - 5));
      std::int64_t end = std::min(nlev[d], start + 5);
      cw.wn[d] = int(end - start);
      cw.wt[d] = int(idx - start);
      first[d] = start;
    }
  }

  // Working-coordinate edges.
  for (int d = 0; d < nd; ++d) {
    if (dom.is_physical(d)) {
      double w = dom.width(d) * double(len[d]) / double(dom.units(d));
      double lo = dom.coord(d, node.ibox.lo[d]);
      for (int j = 0; j <= cw.wn[d]; ++j)
        cw.edges[d][j] = lo + double(j - cw.wt[d]) * w;
      cw.uniform[d] = true;
    } else {
      for (int j = 0; j <= cw.wn[d]; ++j)
        cw.edges[d][j] = mesh.cdf_at(d, (first[d] + j) * len[d]);
      double w0 = cw.edges[d][1] - cw.edges[d][0];
      bool uni = true;
      for (int j = 1; j < cw.wn[d]; ++j) {
        double w = cw.edges[d][j + 1] - cw.edges[d][j];
        if (std::abs(w - w0) > 1e-13 * w0) uni = false;
      }
      cw.uniform[d] = uni;
    }
  }

  // Donor lists per patch slot.
  cw.donor_begin.assign(std::size_t(cw.npatch) + 1, 0);
  cw.donor_cell.clear();
  cw.donor_wval.clear();
  cw.donor_wgrad.clear();

  std::vector<CellId> found;
  int pos[kMaxDim] = {0, 0, 0, 0};
  for (int slot = 0; slot < cw.npatch; ++slot) {
    int rem = slot;
    bool in_window = true;
    for (int d = 0; d < nd; ++d) {
      pos[d] = rem % 5;
      rem /= 5;
      if (pos[d] >= cw.wn[d]) in_window = false;
    }
    if (!in_window) {
      cw.donor_begin[std::size_t(slot) + 1] = std::int32_t(cw.donor_cell.size());
      continue;
    }
    IntBox B;
    double hB = 1.0;
    for (int d = 0; d < nd; ++d) {
      std::int64_t j = first[d] + pos[d];
      if (dom.is_physical(d)) {
        if (dom.periodic(d))
          j = ((j % nlev[d]) + nlev[d]) % nlev[d];
        else
          j = std::clamp<std::int64_t>(j, 0, nlev[d] - 1);
      }
      B.lo[d] = j * len[d];
      B.hi[d] = B.lo[d] + len[d];
      hB *= mesh.slab_mass(d, B.lo[d], B.hi[d]);
    }
    found.clear();
    mesh.query(B, found);
    for (CellId dcell : found) {
      const CellNode& dn = mesh.node(dcell);
      IntBox I = intersect(dn.ibox, B, nd);
      double hI = 1.0;
      for (int d = 0; d < nd; ++d) hI *= mesh.slab_mass(d, I.lo[d], I.hi[d]);
      double wv = hI / hB;
      std::array<double, kMaxDim> wg{};
      for (int d = 0; d < nd; ++d)
        wg[d] = wv * (mesh.slab_center(d, I.lo[d], I.hi[d]) - mesh.center(dcell, d));
      cw.donor_cell.push_back(dcell);
      cw.donor_wval.push_back(wv);
      cw.donor_wgrad.push_back(wg);
    }
    cw.donor_begin[std::size_t(slot) + 1] = std::int32_t(cw.donor_cell.size());
  }
}

// One-sided neighbor aggregate for gradients: donors weighted by shared
// interface measure, plus the full signed offset of the aggregated center.
struct SideAggregate {
  std::vector<CellId> cells;
  std::vector<double> w;
  bool present = false;
  double dc[kMaxDim] = {0, 0, 0, 0};
};

void gather_side(const ForestMesh& mesh, CellId cell, int dir, int side,
                 SideAggregate& out) {
  out.cells.clear();
  out.w.clear();
  out.present = false;
  for (int d = 0; d < kMaxDim; ++d) out.dc[d] = 0.0;
  const DomainSpec& dom = mesh.domain();
  const CellNode& node = mesh.node(cell);
  std::vector<CellId> nb = mesh.neighbors(cell, dir, side);
  if (nb.empty()) return;
  bool wrapped = dom.periodic(dir) &&
                 ((side > 0 && node.ibox.hi[dir] == dom.units(dir)) ||
                  (side < 0 && node.ibox.lo[dir] == 0));
  double wsum = 0.0;
  double csum[kMaxDim] = {0, 0, 0, 0};
  for (CellId b : nb) {
    const CellNode& bn = mesh.node(b);
    double w = 1.0;
    for (int tau = 0; tau < dom.ndim(); ++tau) {
      if (tau == dir) continue;
      std::int64_t lo = std::max(node.ibox.lo[tau], bn.ibox.lo[tau]);
      std::int64_t hi = std::min(node.ibox.hi[tau], bn.ibox.hi[tau]);
      w *= mesh.slab_mass(tau, lo, hi);
    }
    out.cells.push_back(b);
    out.w.push_back(w);
    wsum += w;
    for (int tau = 0; tau < dom.ndim(); ++tau) {
      double c = mesh.center(b, tau);
      if (tau == dir && wrapped)
        c += (side > 0 ? dom.width(dir) : -dom.width(dir));
      csum[tau] += w * c;
    }
  }
  if (!(wsum > 0.0)) {
    out.cells.clear();
    out.w.clear();
    return;
  }
  for (double& w : out.w) w /= wsum;
  for (int tau = 0; tau < dom.ndim(); ++tau)
    out.dc[tau] = csum[tau] / wsum - mesh.center(cell, tau);
  out.present = true;
}

// Limited gradient from one-sided aggregates.  An unlimited least-squares
// gradient first absorbs the tangential center offsets of coarser neighbors;
// the per-direction slopes are then offset-corrected and limited.  Exact for
// linear fields on any 2:1-balanced configuration.
struct SideData {
  bool present = false;
  double dc[kMaxDim] = {0, 0, 0, 0};
  double du[kMaxComp] = {0, 0, 0};
};

void solve_limited_gradient(int nd, int comps, const SideData* sides,
                            Limiter lim, double out[kMaxDim][kMaxComp]) {
  double A[kMaxDim][kMaxDim] = {};
  for (int s = 0; s < 2 * nd; ++s) {
    if (!sides[s].present) continue;
    for (int d = 0; d < nd; ++d)
      for (int e = 0; e < nd; ++e) A[d][e] += sides[s].dc[d] * sides[s].dc[e];
  }
  double scale = 0.0;
  for (int d = 0; d < nd; ++d) scale = std::max(scale, A[d][d]);
  for (int d = 0; d < nd; ++d) {
    if (A[d][d] > 1e-28 * scale) continue;  // no information: pin G_d = 0
    for (int e = 0; e < nd; ++e) A[d][e] = A[e][d] = 0.0;
    A[d][d] = 1.0;
  }

  for (int c = 0; c < comps; ++c) {
    double M[kMaxDim][kMaxDim + 1];
    for (int d = 0; d < nd; ++d) {
      for (int e = 0; e < nd; ++e) M[d][e] = A[d][e];
      double b = 0.0;
      for (int s = 0; s < 2 * nd; ++s)
        if (sides[s].present) b += sides[s].dc[d] * sides[s].du[c];
      M[d][nd] = b;
    }
    double G[kMaxDim] = {0, 0, 0, 0};
    // Gaussian elimination with partial pivoting.
    bool ok = true;
    for (int col = 0; col < nd && ok; ++col) {
      int piv = col;
      for (int r = col + 1; r < nd; ++r)
        if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
      if (std::abs(M[piv][col]) < 1e-300) {
        ok = false;
        break;
      }
      if (piv != col)
        for (int e = 0; e <= nd; ++e) std::swap(M[col][e], M[piv][e]);
      for (int r = 0; r < nd; ++r) {
        if (r == col) continue;
        double f = M[r][col] / M[col][col];
        for (int e = col; e <= nd; ++e) M[r][e] -= f * M[col][e];
      }
    }
    if (ok)
      for (int d = 0; d < nd; ++d) G[d] = M[d][nd] / M[d][d];

    for (int d = 0; d < nd; ++d) {
      const SideData& sm = sides[2 * d];
      const SideData& sp = sides[2 * d + 1];
      auto corrected = [&](const SideData& sd) {
        double num = sd.du[c];
        for (int tau = 0; tau < nd; ++tau)
          if (tau != d) num -= G[tau] * sd.dc[tau];
        return num / sd.dc[d];
      };
      // One-sided at domain boundaries: the slope stays within the hull of
      // the cell and aggregate averages, so virtual refinement cannot
      // overshoot.
      if (sm.present && sp.present)
        out[d][c] = apply_limiter(lim, corrected(sm), corrected(sp));
      else if (sm.present)
        out[d][c] = corrected(sm);
      else if (sp.present)
        out[d][c] = corrected(sp);
      else
        out[d][c] = 0.0;
    }
  }
  for (int d = 0; d < nd; ++d)
    for (int c = comps; c < kMaxComp; ++c) out[d][c] = 0.0;
}

}  // namespace

const CandGeom& PatchGeometry::cand(int cell_slot, int dir,
                                    ReconKind kind) const {
  std::size_t i = std::size_t(cell_slot) * std::size_t(ndim) + std::size_t(dir);
  std::int32_t p = cand_idx[i];
  int n = wn[i], t = wt[i];
  if (p < 0) return uniform_candidates(kind, n, t);
  if (kind == ReconKind::weno3) return pool3[std::size_t(p)];
  if (kind == ReconKind::weno5) return pool5[std::size_t(p)];
  return uniform_candidates(ReconKind::p0, n, t);
}

void build_patch_geometry(const ForestMesh& mesh, PatchGeometry& geo) {
  const int nd = mesh.ndim();
  const auto& act = mesh.active();
  const std::size_t n = act.size();

  geo = PatchGeometry{};
  geo.mesh_version = mesh.version();
  geo.ndim = nd;
  geo.npatch = 1;
  for (int d = 0; d < nd; ++d) geo.npatch *= 5;

  geo.donor_begin.assign(n * std::size_t(geo.npatch) + 1, 0);
  geo.edges.assign(n * std::size_t(nd) * 6, 0.0);
  geo.wn.assign(n * std::size_t(nd), 1);
  geo.wt.assign(n * std::size_t(nd), 0);
  geo.cand_idx.assign(n * std::size_t(nd), -1);
  geo.gside_begin.assign(n * std::size_t(nd) * 2 + 1, 0);
  geo.gside_dc.assign(n * std::size_t(nd) * 2 * kMaxDim, 0.0);

  CellWindows cw;
  SideAggregate agg;
  for (std::size_t s = 0; s < n; ++s) {
    CellId c = act[s];
    gather_cell_windows(mesh, c, cw);
    for (int d = 0; d < nd; ++d) {
      std::size_t i = s * std::size_t(nd) + std::size_t(d);
      geo.wn[i] = std::uint8_t(cw.wn[d]);
      geo.wt[i] = std::uint8_t(cw.wt[d]);
      for (int j = 0; j < 6; ++j) geo.edges[i * 6 + std::size_t(j)] = cw.edges[d][j];
      if (cw.uniform[d]) {
        geo.cand_idx[i] = -1;
      } else {
        geo.cand_idx[i] = std::int32_t(geo.pool5.size());
        CandGeom cg;
        build_candidates(ReconKind::weno5, cw.wn[d], cw.wt[d], cw.edges[d], cg);
        geo.pool5.push_back(cg);
        build_candidates(ReconKind::weno3, cw.wn[d], cw.wt[d], cw.edges[d], cg);
        geo.pool3.push_back(cg);
      }
    }
    for (int p = 0; p < cw.npatch; ++p) {
      std::size_t base = s * std::size_t(geo.npatch) + std::size_t(p);
      for (std::int32_t k = cw.donor_begin[std::size_t(p)];
           k < cw.donor_begin[std::size_t(p) + 1]; ++k) {
        PatchDonor pd;
        pd.slot = mesh.node(cw.donor_cell[std::size_t(k)]).slot;
        pd.w_val = cw.donor_wval[std::size_t(k)];
        pd.w_grad = cw.donor_wgrad[std::size_t(k)];
        geo.donors.push_back(pd);
      }
      geo.donor_begin[base + 1] = std::int64_t(geo.donors.size());
    }
    for (int d = 0; d < nd; ++d) {
      for (int side = 0; side < 2; ++side) {
        gather_side(mesh, c, d, side == 0 ? -1 : +1, agg);
        std::size_t gi = (s * std::size_t(nd) + std::size_t(d)) * 2 + std::size_t(side);
        for (std::size_t k = 0; k < agg.cells.size(); ++k)
          geo.gdonors.push_back(GradDonor{mesh.node(agg.cells[k]).slot, agg.w[k]});
        geo.gside_begin[gi + 1] = std::int32_t(geo.gdonors.size());
        if (agg.present)
          for (int tau = 0; tau < nd; ++tau)
            geo.gside_dc[gi * kMaxDim + std::size_t(tau)] = agg.dc[tau];
      }
    }
  }
}

void fill_patch_values(const ForestMesh& mesh, const PatchGeometry& geo,
                       const double* field, int comps, Limiter lim,
                       PatchValues& vals) {
  const int nd = geo.ndim;
  const std::size_t n = mesh.active().size();
  vals.comps = comps;
  vals.avg.assign(n * std::size_t(geo.npatch) * std::size_t(comps), 0.0);
  vals.grad.assign(n * std::size_t(nd) * std::size_t(comps), 0.0);

#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < std::int64_t(n); ++s) {
    SideData sides[2 * kMaxDim];
    for (int d = 0; d < nd; ++d) {
      for (int side = 0; side < 2; ++side) {
        std::size_t gi =
            (std::size_t(s) * std::size_t(nd) + std::size_t(d)) * 2 + std::size_t(side);
        SideData& sd = sides[2 * d + side];
        sd = SideData{};
        sd.present = (geo.gside_dc[gi * kMaxDim + std::size_t(d)] != 0.0);
        if (!sd.present) continue;
        for (int tau = 0; tau < nd; ++tau)
          sd.dc[tau] = geo.gside_dc[gi * kMaxDim + std::size_t(tau)];
        for (int c = 0; c < comps; ++c) {
          double uside = 0.0;
          for (std::int32_t k = geo.gside_begin[gi]; k < geo.gside_begin[gi + 1]; ++k)
            uside += geo.gdonors[std::size_t(k)].w *
                     field[std::size_t(geo.gdonors[std::size_t(k)].slot) *
                               std::size_t(comps) + std::size_t(c)];
          sd.du[c] =
              uside - field[std::size_t(s) * std::size_t(comps) + std::size_t(c)];
        }
      }
    }
    double g[kMaxDim][kMaxComp];
    solve_limited_gradient(nd, comps, sides, lim, g);
    for (int d = 0; d < nd; ++d)
      for (int c = 0; c < comps; ++c)
        vals.grad[(std::size_t(s) * std::size_t(nd) + std::size_t(d)) *
                      std::size_t(comps) + std::size_t(c)] = g[d][c];
  }

#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < std::int64_t(n); ++s) {
    for (int p = 0; p < geo.npatch; ++p) {
      std::size_t base = std::size_t(s) * std::size_t(geo.npatch) + std::size_t(p);
      for (std::int64_t k = geo.donor_begin[base]; k < geo.donor_begin[base + 1];
           ++k) {
        const PatchDonor& pd = geo.donors[std::size_t(k)];
        for (int c = 0; c < comps; ++c) {
          double v = pd.w_val *
                     field[std::size_t(pd.slot) * std::size_t(comps) + std::size_t(c)];
          for (int d = 0; d < nd; ++d)
            v += pd.w_grad[std::size_t(d)] *
                 vals.grad[(std::size_t(pd.slot) * std::size_t(nd) + std::size_t(d)) *
                               std::size_t(comps) + std::size_t(c)];
          vals.avg[base * std::size_t(comps) + std::size_t(c)] += v;
        }
      }
    }
  }
}

void limited_gradient(const ForestMesh& mesh, const double* field, int comps,
                      CellId cell, Limiter lim,
                      double out[kMaxDim][kMaxComp],
                      double* hull_lo, double* hull_hi) {
  const int nd = mesh.ndim();
  SideData sides[2 * kMaxDim];
  SideAggregate agg;
  if (hull_lo && hull_hi) {
    for (int c = 0; c < comps; ++c) {
      const double u0 = field[std::size_t(mesh.node(cell).slot) *
                                  std::size_t(comps) + std::size_t(c)];
      hull_lo[c] = u0;
      hull_hi[c] = u0;
    }
  }
  for (int d = 0; d < nd; ++d) {
    for (int side = 0; side < 2; ++side) {
      gather_side(mesh, cell, d, side == 0 ? -1 : +1, agg);
      SideData& sd = sides[2 * d + side];
      sd = SideData{};
      sd.present = agg.present;
      if (!agg.present) continue;
      for (int tau = 0; tau < nd; ++tau) sd.dc[tau] = agg.dc[tau];
      for (int c = 0; c < comps; ++c) {
        double uside = 0.0;
        for (std::size_t k = 0; k < agg.cells.size(); ++k)
          uside += agg.w[k] *
                   field[std::size_t(mesh.node(agg.cells[k]).slot) *
                             std::size_t(comps) + std::size_t(c)];
        const double u0 = field[std::size_t(mesh.node(cell).slot) *
                                    std::size_t(comps) + std::size_t(c)];
        sd.du[c] = uside - u0;
        if (hull_lo && hull_hi) {
          hull_lo[c] = std::min(hull_lo[c], uside);
          hull_hi[c] = std::max(hull_hi[c], uside);
        }
      }
    }
  }
  solve_limited_gradient(nd, comps, sides, lim, out);
}

namespace {

// Collapse the leading remaining direction of a base-5 flattened value block
// at evaluation coordinate xi, one component at a time.
void sweep_eval(const CandGeom& cg, const double* edges, double xi, int lead_n,
                const int* rest_n, int nrest, const double* in, double* out) {
  double zmid = 0.5 * (edges[cg.t] + edges[cg.t + 1]);
  double zw = edges[cg.t + 1] - edges[cg.t];
  int total = 1;
  for (int d = 0; d < nrest; ++d) total *= 5;
  (void)lead_n;
  int rest[kMaxDim] = {0, 0, 0, 0};
  for (int r = 0; r < total; ++r) {
    int rem = r;
    bool live = true;
    for (int d = 0; d < nrest; ++d) {
      rest[d] = rem % 5;
      rem /= 5;
      if (rest[d] >= rest_n[d]) live = false;
    }
    if (!live) continue;
    LineRecon lr;
    build_line(cg, in + std::size_t(r) * 5, zmid, zw, lr);
    out[r] = lr.eval(xi);
  }
}

}  // namespace

void reconstruct_point(const ForestMesh& mesh, const PatchGeometry& geo,
                       const PatchValues& vals, int cell_slot, ReconKind kind,
                       const double* xi, double* out) {
  (void)mesh;
  const int nd = geo.ndim;
  const int comps = vals.comps;
  double bufa[625], bufb[625];
  for (int c = 0; c < comps; ++c) {
    // Gather this component, base-5 flattened.
    const double* src =
        &vals.avg[std::size_t(cell_slot) * std::size_t(geo.npatch) * std::size_t(comps)];
    for (int p = 0; p < geo.npatch; ++p)
      bufa[p] = src[std::size_t(p) * std::size_t(comps) + std::size_t(c)];
    double* cur = bufa;
    double* nxt = bufb;
    for (int d = 0; d < nd; ++d) {
      std::size_t i = std::size_t(cell_slot) * std::size_t(nd) + std::size_t(d);
      const CandGeom& cg = geo.cand(cell_slot, d, kind);
      int rest_n[kMaxDim];
      for (int r = d + 1; r < nd; ++r)
        rest_n[r - d - 1] = geo.wn[std::size_t(cell_slot) * std::size_t(nd) + std::size_t(r)];
      sweep_eval(cg, &geo.edges[i * 6], xi[d], geo.wn[i], rest_n, nd - d - 1,
                 cur, nxt);
      std::swap(cur, nxt);
    }
    out[c] = cur[0];
  }
}

void reconstruct_trace_line(const ForestMesh& mesh, const PatchGeometry& geo,
                            const PatchValues& vals, int cell_slot,
                            ReconKind kind, const double* xi, LineRecon* out) {
  (void)mesh;
  const int nd = geo.ndim;
  const int comps = vals.comps;
  double bufa[625], bufb[625];
  for (int c = 0; c < comps; ++c) {
    const double* src =
        &vals.avg[std::size_t(cell_slot) * std::size_t(geo.npatch) *
                  std::size_t(comps)];
    for (int p = 0; p < geo.npatch; ++p)
      bufa[p] = src[std::size_t(p) * std::size_t(comps) + std::size_t(c)];
    double* cur = bufa;
    double* nxt = bufb;
    for (int d = 0; d + 1 < nd; ++d) {
      std::size_t i = std::size_t(cell_slot) * std::size_t(nd) + std::size_t(d);
      const CandGeom& cg = geo.cand(cell_slot, d, kind);
      int rest_n[kMaxDim];
      for (int r = d + 1; r < nd; ++r)
        rest_n[r - d - 1] =
            geo.wn[std::size_t(cell_slot) * std::size_t(nd) + std::size_t(r)];
      sweep_eval(cg, &geo.edges[i * 6], xi[d], geo.wn[i], rest_n, nd - d - 1,
                 cur, nxt);
      std::swap(cur, nxt);
    }
    const int d = nd - 1;
    std::size_t i = std::size_t(cell_slot) * std::size_t(nd) + std::size_t(d);
    const CandGeom& cg = geo.cand(cell_slot, d, kind);
    const double* edges = &geo.edges[i * 6];
    build_line(cg, cur, 0.5 * (edges[cg.t] + edges[cg.t + 1]),
               edges[cg.t + 1] - edges[cg.t], out[c]);
  }
}

void reconstruct_point_direct(const ForestMesh& mesh, const double* field,
                              int comps, Limiter lim, CellId cell,
                              ReconKind kind, const double* xi, double* out) {
  CellWindows cw;
  gather_cell_windows(mesh, cell, cw);

  // Donor gradients on the fly.
  double patch[625];
  double grad[kMaxDim][kMaxComp];
  for (int c = 0; c < comps; ++c) {
    for (int p = 0; p < cw.npatch; ++p) {
      double acc = 0.0;
      for (std::int32_t k = cw.donor_begin[std::size_t(p)];
           k < cw.donor_begin[std::size_t(p) + 1]; ++k) {
        CellId dc = cw.donor_cell[std::size_t(k)];
        limited_gradient(mesh, field, comps, dc, lim, grad);
        double v = field[std::size_t(mesh.node(dc).slot) * std::size_t(comps) +
                         std::size_t(c)] *
                   cw.donor_wval[std::size_t(k)];
        for (int d = 0; d < cw.ndim; ++d)
          v += cw.donor_wgrad[std::size_t(k)][std::size_t(d)] * grad[d][c];
        acc += v;
      }
      patch[p] = acc;
    }
    double bufb[625];
    double* cur = patch;
    double* nxt = bufb;
    for (int d = 0; d < cw.ndim; ++d) {
      CandGeom cg;
      build_candidates(kind, cw.wn[d], cw.wt[d], cw.edges[d], cg);
      int rest_n[kMaxDim];
      for (int r = d + 1; r < cw.ndim; ++r) rest_n[r - d - 1] = cw.wn[r];
      sweep_eval(cg, cw.edges[d], xi[d], cw.wn[d], rest_n, cw.ndim - d - 1, cur,
                 nxt);
      std::swap(cur, nxt);
    }
    out[c] = cur[0];
  }
}

}  // namespace sfv
