#include "sfv/sfv_rhs.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "sfv/measures.hpp"

namespace sfv {

namespace {

void check_admissible(const ForestMesh& mesh, const ConservationLaw& law,
                      const SolutionField& u) {
  if (law.kind != LawKind::euler) return;
  const std::vector<CellId>& act = mesh.active();
  for (std::size_t s = 0; s < act.size(); ++s) {
    State st{};
    for (int c = 0; c < law.components; ++c) st[c] = u.data[s * u.comps + c];
    if (!admissible(law, st))
      throw PositivityError("cell average lost positivity", act[s]);
  }
}

}  // namespace

void FaceQuadCache::build(const ForestMesh& mesh, int quad_pts) {
  const DomainSpec& dom = mesh.domain();
  if (dom.n_physical != 1)
    throw std::logic_error("face quadrature assumes one physical direction");
  mesh_version = mesh.version();
  npts = quad_pts;
  faces = mesh.flux_faces();
  const int nsd = dom.ndim() - dom.n_physical;

  qbegin.assign(faces.size() + 1, 0);
  qw.clear();
  qxi.clear();
  xminus.assign(faces.size(), 0.0);
  xplus.assign(faces.size(), 0.0);
  boundary_faces.clear();

  std::vector<QuadratureRule> rules{std::size_t(nsd)};
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const FluxFace& f = faces[i];
    if (f.minus != kInvalidCell) xminus[i] = mesh.box(f.minus).hi[f.dir];
    if (f.plus != kInvalidCell) xplus[i] = mesh.box(f.plus).lo[f.dir];
    if (f.minus == kInvalidCell) xminus[i] = xplus[i];
    if (f.plus == kInvalidCell) xplus[i] = xminus[i];
    if (f.minus == kInvalidCell || f.plus == kInvalidCell)
      boundary_faces.push_back(std::int32_t(i));

    int total = 1;
    for (int sd = 0; sd < nsd; ++sd) {
      const int d = dom.n_physical + sd;
      rules[std::size_t(sd)] =
          quadrature(mesh.measure().factors[std::size_t(sd)],
                     dom.coord(d, f.strip.lo[d]), dom.coord(d, f.strip.hi[d]),
                     npts);
      total *= npts;
    }
    for (int j = 0; j < total; ++j) {
      int rem = j;
      double w = 1.0;
      for (int sd = 0; sd < nsd; ++sd) {
        const int k = rem % npts;
        rem /= npts;
        const QuadratureRule& r = rules[std::size_t(sd)];
        w *= r.weights[std::size_t(k)];
        qxi.push_back(cdf(mesh.measure().factors[std::size_t(sd)],
                          r.nodes[std::size_t(k)]));
      }
      qw.push_back(w);
    }
    qbegin[i + 1] = qbegin[i] + std::int32_t(total);
  }

  const std::size_t nslots = mesh.n_active();
  inc_begin.assign(nslots + 1, 0);
  for (const FluxFace& f : faces) {
    if (f.minus != kInvalidCell) ++inc_begin[mesh.node(f.minus).slot + 1];
    if (f.plus != kInvalidCell) ++inc_begin[mesh.node(f.plus).slot + 1];
  }
  for (std::size_t s = 0; s < nslots; ++s) inc_begin[s + 1] += inc_begin[s];
  inc_face.assign(std::size_t(inc_begin[nslots]), 0);
  inc_sign.assign(std::size_t(inc_begin[nslots]), 0);
  std::vector<std::int32_t> cursor(inc_begin.begin(), inc_begin.end() - 1);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const FluxFace& f = faces[i];
    if (f.minus != kInvalidCell) {
      const std::int32_t at = cursor[mesh.node(f.minus).slot]++;
      inc_face[at] = std::int32_t(i);
      inc_sign[at] = +1;
    }
    if (f.plus != kInvalidCell) {
      const std::int32_t at = cursor[mesh.node(f.plus).slot]++;
      inc_face[at] = std::int32_t(i);
      inc_sign[at] = -1;
    }
  }
}

RhsResult compute_rhs(const ForestMesh& mesh, const PatchGeometry& geo,
                      const FaceQuadCache& fq, const ConservationLaw& law,
                      ReconKind kind, Limiter lim, const SolutionField& u,
                      SolutionField& rhs, RhsWorkspace& ws, bool reuse_vals) {
  const DomainSpec& dom = mesh.domain();
  const int comps = law.components;
  const int nsd = dom.ndim() - dom.n_physical;
  const std::vector<CellId>& act = mesh.active();
  if (u.comps != comps)
    throw std::logic_error("field and law component counts disagree");
  if (fq.mesh_version != mesh.version() || geo.mesh_version != mesh.version())
    throw std::logic_error("stale geometry cache");

  if (!reuse_vals)
    fill_patch_values(mesh, geo, u.data.data(), comps, lim, ws.vals);
  ws.faceint.assign(fq.faces.size() * std::size_t(comps), 0.0);

  // With one stochastic direction the trace on a face plane is a single
  // polynomial per cell edge; building those up front turns the inner
  // quadrature loop into plain evaluations.
  const bool edge_lines = dom.ndim() == 2;
  if (edge_lines) {
    ws.lines.resize(act.size() * 2 * std::size_t(comps));
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < std::int64_t(act.size()); ++s) {
      const Box b = mesh.box(act[std::size_t(s)]);
      double xi[kMaxDim] = {0, 0, 0, 0};
      xi[0] = b.lo[0];
      reconstruct_trace_line(mesh, geo, ws.vals, int(s), kind, xi,
                             &ws.lines[std::size_t(s) * 2 * comps]);
      xi[0] = b.hi[0];
      reconstruct_trace_line(mesh, geo, ws.vals, int(s), kind, xi,
                             &ws.lines[(std::size_t(s) * 2 + 1) * comps]);
    }
  }

  bool failed = false;
  CellId failed_cell = 0;
  const bool track = law.kind == LawKind::euler;
  double tmin_rho = 1e300, tmin_p = 1e300;

#pragma omp parallel for schedule(dynamic, 8) reduction(min : tmin_rho, tmin_p)
  for (std::int64_t i = 0; i < std::int64_t(fq.faces.size()); ++i) {
    if (failed) continue;
    const FluxFace& f = fq.faces[std::size_t(i)];
    double acc[kMaxComp] = {0, 0, 0};
    const std::int32_t slot_m =
        f.minus != kInvalidCell ? mesh.node(f.minus).slot : -1;
    const std::int32_t slot_p =
        f.plus != kInvalidCell ? mesh.node(f.plus).slot : -1;
    const LineRecon* lm =
        edge_lines && slot_m >= 0
            ? &ws.lines[(std::size_t(slot_m) * 2 + 1) * comps]
            : nullptr;
    const LineRecon* lp = edge_lines && slot_p >= 0
                              ? &ws.lines[std::size_t(slot_p) * 2 * comps]
                              : nullptr;
    for (std::int32_t j = fq.qbegin[std::size_t(i)];
         j < fq.qbegin[std::size_t(i) + 1]; ++j) {
      double xi[kMaxDim] = {0, 0, 0, 0};
      for (int sd = 0; sd < nsd; ++sd)
        xi[dom.n_physical + sd] = fq.qxi[std::size_t(j) * nsd + sd];
      State ul{}, ur{};
      if (lm) {
        for (int c = 0; c < comps; ++c) ul[c] = lm[c].eval(xi[1]);
      } else if (slot_m >= 0) {
        xi[f.dir] = fq.xminus[std::size_t(i)];
        reconstruct_point(mesh, geo, ws.vals, slot_m, kind, xi, ul.data());
      }
      if (lp) {
        for (int c = 0; c < comps; ++c) ur[c] = lp[c].eval(xi[1]);
      } else if (slot_p >= 0) {
        xi[f.dir] = fq.xplus[std::size_t(i)];
        reconstruct_point(mesh, geo, ws.vals, slot_p, kind, xi, ur.data());
      }
      if (slot_m < 0) ul = ur;
      if (slot_p < 0) ur = ul;
      if (track) {
        tmin_rho = std::min(tmin_rho, std::min(ul[0], ur[0]));
        tmin_p = std::min(tmin_p, std::min(euler_pressure(law, ul),
                                           euler_pressure(law, ur)));
      }
      State fl;
      try {
        fl = rusanov(law, ul, ur);
      } catch (const PositivityError&) {
#pragma omp critical
        {
          failed = true;
          failed_cell = f.minus != kInvalidCell ? f.minus : f.plus;
        }
        break;
      }
      for (int c = 0; c < comps; ++c) acc[c] += fq.qw[std::size_t(j)] * fl[c];
    }
    for (int c = 0; c < comps; ++c)
      ws.faceint[std::size_t(i) * comps + c] = acc[c];
  }
  if (failed)
    throw PositivityError("face trace lost positivity", failed_cell);

  rhs.comps = u.comps;
  rhs.data.assign(act.size() * std::size_t(u.comps), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < std::int64_t(act.size()); ++s) {
    const double inv_h = 1.0 / mesh.cell_volume(act[std::size_t(s)]);
    double* out = rhs.data.data() + std::size_t(s) * u.comps;
    for (std::int32_t k = fq.inc_begin[std::size_t(s)];
         k < fq.inc_begin[std::size_t(s) + 1]; ++k) {
      const double sgn = fq.inc_sign[k];
      const double* fi = ws.faceint.data() + std::size_t(fq.inc_face[k]) * comps;
      for (int c = 0; c < comps; ++c) out[c] -= inv_h * sgn * fi[c];
    }
  }

  RhsResult res;
  res.min_trace_density = tmin_rho;
  res.min_trace_pressure = tmin_p;
  for (std::int32_t bi : fq.boundary_faces) {
    const FluxFace& f = fq.faces[std::size_t(bi)];
    const double sgn = f.plus == kInvalidCell ? +1.0 : -1.0;
    for (int c = 0; c < comps; ++c)
      res.boundary_net[c] += sgn * ws.faceint[std::size_t(bi) * comps + c];
  }
  return res;
}

RhsResult compute_rhs_reference(const ForestMesh& mesh,
                                const ConservationLaw& law, ReconKind kind,
                                Limiter lim, const SolutionField& u,
                                SolutionField& rhs, int quad_pts) {
  const DomainSpec& dom = mesh.domain();
  if (dom.n_physical != 1)
    throw std::logic_error("face quadrature assumes one physical direction");
  const int comps = law.components;
  const int nsd = dom.ndim() - dom.n_physical;
  const std::vector<CellId>& act = mesh.active();

  rhs.comps = u.comps;
  rhs.data.assign(act.size() * std::size_t(u.comps), 0.0);
  RhsResult res;

  std::vector<QuadratureRule> rules{std::size_t(nsd)};
  for (const FluxFace& f : mesh.flux_faces()) {
    double xm = 0.0, xp = 0.0;
    if (f.minus != kInvalidCell) xm = mesh.box(f.minus).hi[f.dir];
    if (f.plus != kInvalidCell) xp = mesh.box(f.plus).lo[f.dir];
    if (f.minus == kInvalidCell) xm = xp;
    if (f.plus == kInvalidCell) xp = xm;

    int total = 1;
    for (int sd = 0; sd < nsd; ++sd) {
      const int d = dom.n_physical + sd;
      rules[std::size_t(sd)] =
          quadrature(mesh.measure().factors[std::size_t(sd)],
                     dom.coord(d, f.strip.lo[d]), dom.coord(d, f.strip.hi[d]),
                     quad_pts);
      total *= quad_pts;
    }
    double acc[kMaxComp] = {0, 0, 0};
    for (int j = 0; j < total; ++j) {
      int rem = j;
      double w = 1.0;
      double xi[kMaxDim] = {0, 0, 0, 0};
      for (int sd = 0; sd < nsd; ++sd) {
        const int k = rem % quad_pts;
        rem /= quad_pts;
        const QuadratureRule& r = rules[std::size_t(sd)];
        w *= r.weights[std::size_t(k)];
        xi[dom.n_physical + sd] = cdf(mesh.measure().factors[std::size_t(sd)],
                                      r.nodes[std::size_t(k)]);
      }
      State ul{}, ur{};
      if (f.minus != kInvalidCell) {
        xi[f.dir] = xm;
        reconstruct_point_direct(mesh, u.data.data(), comps, lim, f.minus,
                                 kind, xi, ul.data());
      }
      if (f.plus != kInvalidCell) {
        xi[f.dir] = xp;
        reconstruct_point_direct(mesh, u.data.data(), comps, lim, f.plus, kind,
                                 xi, ur.data());
      }
      if (f.minus == kInvalidCell) ul = ur;
      if (f.plus == kInvalidCell) ur = ul;
      if (law.kind == LawKind::euler) {
        res.min_trace_density =
            std::min(res.min_trace_density, std::min(ul[0], ur[0]));
        res.min_trace_pressure =
            std::min(res.min_trace_pressure,
                     std::min(euler_pressure(law, ul),
                              euler_pressure(law, ur)));
      }
      State fl;
      try {
        fl = rusanov(law, ul, ur);
      } catch (const PositivityError&) {
        throw PositivityError("face trace lost positivity",
                              f.minus != kInvalidCell ? f.minus : f.plus);
      }
      for (int c = 0; c < comps; ++c) acc[c] += w * fl[c];
    }

    if (f.minus != kInvalidCell) {
      double* out =
          rhs.data.data() + std::size_t(mesh.node(f.minus).slot) * u.comps;
      const double inv_h = 1.0 / mesh.cell_volume(f.minus);
      for (int c = 0; c < comps; ++c) out[c] -= inv_h * acc[c];
    } else {
      for (int c = 0; c < comps; ++c) res.boundary_net[c] -= acc[c];
    }
    if (f.plus != kInvalidCell) {
      double* out =
          rhs.data.data() + std::size_t(mesh.node(f.plus).slot) * u.comps;
      const double inv_h = 1.0 / mesh.cell_volume(f.plus);
      for (int c = 0; c < comps; ++c) out[c] += inv_h * acc[c];
    } else {
      for (int c = 0; c < comps; ++c) res.boundary_net[c] += acc[c];
    }
  }
  return res;
}

double compute_dt(const ForestMesh& mesh, const ConservationLaw& law,
                  const SolutionField& u, double cfl, double cap) {
  const std::vector<CellId>& act = mesh.active();
  double worst = 0.0;  // max signal speed over cell width
  for (std::size_t s = 0; s < act.size(); ++s) {
    State st{};
    for (int c = 0; c < law.components; ++c) st[c] = u.data[s * u.comps + c];
    if (!admissible(law, st))
      throw PositivityError("cell average lost positivity", act[s]);
    worst = std::max(worst, max_wave_speed(law, st) / mesh.width(act[s], 0));
  }
  if (!(worst > 0.0)) return cap;
  return std::min(cap, cfl / worst);
}

void ssp_rk3_step(const ForestMesh& mesh, const PatchGeometry& geo,
                  const FaceQuadCache& fq, const ConservationLaw& law,
                  ReconKind kind, Limiter lim, SolutionField& u, double dt,
                  RhsWorkspace& ws, StepAudit* audit, const StageRhs* stage1) {
  const std::size_t n = u.data.size();
  const std::vector<double> u0 = u.data;
  SolutionField r;

  RhsResult b0;
  if (stage1 != nullptr) {
    r = stage1->rhs;
    b0 = stage1->res;
  } else {
    b0 = compute_rhs(mesh, geo, fq, law, kind, lim, u, r, ws);
  }
  for (std::size_t i = 0; i < n; ++i) u.data[i] = u0[i] + dt * r.data[i];
  check_admissible(mesh, law, u);

  const RhsResult b1 = compute_rhs(mesh, geo, fq, law, kind, lim, u, r, ws);
  for (std::size_t i = 0; i < n; ++i)
    u.data[i] = 0.75 * u0[i] + 0.25 * (u.data[i] + dt * r.data[i]);
  check_admissible(mesh, law, u);

  const RhsResult b2 = compute_rhs(mesh, geo, fq, law, kind, lim, u, r, ws);
  for (std::size_t i = 0; i < n; ++i)
    u.data[i] = (u0[i] + 2.0 * (u.data[i] + dt * r.data[i])) / 3.0;
  check_admissible(mesh, law, u);

  if (audit != nullptr) {
    for (int c = 0; c < law.components; ++c)
      audit->boundary[c] += dt * (b0.boundary_net[c] / 6.0 +
                                  b1.boundary_net[c] / 6.0 +
                                  2.0 * b2.boundary_net[c] / 3.0);
    audit->min_density =
        std::min(audit->min_density,
                 std::min(b0.min_trace_density,
                          std::min(b1.min_trace_density, b2.min_trace_density)));
    audit->min_pressure =
        std::min(audit->min_pressure,
                 std::min(b0.min_trace_pressure,
                          std::min(b1.min_trace_pressure,
                                   b2.min_trace_pressure)));
  }
}

}  // namespace sfv
