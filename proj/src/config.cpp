#include "sfv/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace sfv {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw ConfigError(where.empty() ? msg : where + ": " + msg);
}

// Every lookup goes through one of these so error messages carry the dotted
// path of the offending key.
const json& member(const json& obj, const std::string& path,
                   const char* key) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    fail(path.empty() ? std::string(key) : path + "." + key, "missing key");
  return *it;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  std::set<std::string> ok;
  for (const char* k : allowed) ok.insert(k);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key()))
      fail(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

double require_in(double x, double lo, double hi, const std::string& path) {
  if (!(x >= lo && x <= hi)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "value %g outside [%g, %g]", x, lo, hi);
    fail(path, buf);
  }
  return x;
}

LawKind parse_law_kind(const std::string& s, const std::string& path) {
  if (s == "advection") return LawKind::advection;
  if (s == "burgers") return LawKind::burgers;
  if (s == "euler") return LawKind::euler;
  fail(path, "unknown law '" + s + "'");
}

MeasureKind parse_measure_kind(const std::string& s, const std::string& path) {
  if (s == "uniform") return MeasureKind::uniform;
  if (s == "beta") return MeasureKind::beta;
  if (s == "truncated_normal") return MeasureKind::truncated_normal;
  fail(path, "unknown measure '" + s + "'");
}

ReconKind parse_recon_kind(const std::string& s, const std::string& path) {
  if (s == "p0") return ReconKind::p0;
  if (s == "weno3") return ReconKind::weno3;
  if (s == "weno5") return ReconKind::weno5;
  fail(path, "unknown reconstruction '" + s + "'");
}

const char* recon_name(ReconKind k) {
  switch (k) {
    case ReconKind::p0: return "p0";
    case ReconKind::weno3: return "weno3";
    default: return "weno5";
  }
}

// Deep merge of user input over defaults; user values win, objects recurse.
json merge(const json& base, const json& over) {
  if (!base.is_object() || !over.is_object()) return over;
  json out = base;
  for (auto it = over.begin(); it != over.end(); ++it) {
    auto jt = out.find(it.key());
    if (jt != out.end() && jt->is_object() && it->is_object())
      *jt = merge(*jt, *it);
    else
      out[it.key()] = *it;
  }
  return out;
}

}  // namespace

json problem_defaults(const std::string& id) {
  json j;
  j["problem"] = id;
  j["mesh"] = {{"cells_per_dim", 16}, {"max_level", 6}, {"mode", "adaptive"}};
  j["tolerances"] = {{"eps_per_dt", 1e-4},
                     {"eps_aniso", 0.5},
                     {"coarsen_frac", 0.1},
                     {"c_ref", 1.0}};
  j["reconstruction"] = {{"high", "weno5"},
                         {"low", "weno3"},
                         {"limiter", "minmod"},
                         {"quad_pts", 6}};
  j["outputs"] = {{"probes", 101},
                  {"pdf_samples", 4096},
                  {"pdf_grid", 512},
                  {"pdf_probes", json::array()},
                  {"out_dir", ""}};
  j["stepper"] = {{"t_end", 0.25}, {"cfl", 0.4}, {"dt_cap", 0.0}};
  if (id == "transport") {
    j["law"] = {{"kind", "advection"}, {"speed", 1.0}};
    j["measure"] = {{"kind", "uniform"}, {"a", 0.0}, {"b", 1.0}};
    j["domain"] = {{"x_lo", 0.0}, {"x_hi", 1.0}, {"boundary", "periodic"}};
  } else if (id == "burgers_sine") {
    j["law"] = {{"kind", "burgers"}};
    j["measure"] = {{"kind", "beta"}, {"alpha", 2.0}, {"beta", 5.0}};
    j["domain"] = {{"x_lo", 0.0}, {"x_hi", 1.0}, {"boundary", "periodic"}};
    j["stepper"]["t_end"] = 0.35;
  } else if (id == "euler_three_state") {
    j["law"] = {{"kind", "euler"}, {"gamma", 1.4}};
    j["measure"] = {{"kind", "uniform"}, {"a", 0.0}, {"b", 1.0}};
    j["domain"] = {{"x_lo", 0.0}, {"x_hi", 1.0}, {"boundary", "free_flow"}};
    j["mesh"]["cells_per_dim"] = 24;
    j["stepper"]["t_end"] = 0.1;
    j["outputs"]["pdf_probes"] = {0.581};
  } else {
    fail("problem", "unknown problem '" + id + "'");
  }
  return j;
}

RunConfig parse_config(const json& user) {
  check_keys(user, "", {"problem", "law", "measure", "domain", "mesh",
                        "tolerances", "stepper", "reconstruction", "outputs"});

  // "problem" is a plain id string or {id, y_constant}.
  const json& p = member(user, "", "problem");
  std::string id;
  bool y_constant = false;
  if (p.is_string()) {
    id = p.get<std::string>();
  } else if (p.is_object()) {
    check_keys(p, "problem", {"id", "y_constant"});
    id = as_string(member(p, "problem", "id"), "problem.id");
    if (p.contains("y_constant"))
      y_constant = as_bool(p["y_constant"], "problem.y_constant");
  } else {
    fail("problem", "expected a string or an object");
  }

  json doc = merge(problem_defaults(id), user);
  doc["problem"] = id;

  RunConfig cfg;
  cfg.problem = id;
  cfg.y_constant = y_constant;

  {
    const json& law = doc["law"];
    check_keys(law, "law", {"kind", "speed", "gamma"});
    cfg.law.kind =
        parse_law_kind(as_string(member(law, "law", "kind"), "law.kind"),
                       "law.kind");
    if (law.contains("speed"))
      cfg.law.speed = as_number(law["speed"], "law.speed");
    if (law.contains("gamma"))
      cfg.law.gamma = require_in(as_number(law["gamma"], "law.gamma"), 1.0001,
                                 10.0, "law.gamma");
  }

  {
    const json& m = doc["measure"];
    check_keys(m, "measure",
               {"kind", "a", "b", "alpha", "beta", "mean", "sd"});
    const MeasureKind kind = parse_measure_kind(
        as_string(member(m, "measure", "kind"), "measure.kind"),
        "measure.kind");
    double a = m.contains("a") ? as_number(m["a"], "measure.a") : 0.0;
    double b = m.contains("b") ? as_number(m["b"], "measure.b") : 1.0;
    if (!(a < b)) fail("measure", "support must satisfy a < b");
    switch (kind) {
      case MeasureKind::uniform:
        cfg.measure = make_uniform(a, b);
        break;
      case MeasureKind::beta: {
        double al = m.contains("alpha") ? as_number(m["alpha"], "measure.alpha")
                                        : 1.0;
        double be =
            m.contains("beta") ? as_number(m["beta"], "measure.beta") : 1.0;
        require_in(al, 1e-3, 1e3, "measure.alpha");
        require_in(be, 1e-3, 1e3, "measure.beta");
        cfg.measure = make_beta(al, be);
        break;
      }
      case MeasureKind::truncated_normal: {
        double mean =
            m.contains("mean") ? as_number(m["mean"], "measure.mean") : 0.5;
        double sd = m.contains("sd") ? as_number(m["sd"], "measure.sd") : 1.0;
        if (!(sd > 0)) fail("measure.sd", "must be positive");
        cfg.measure = make_truncated_normal(mean, sd, a, b);
        break;
      }
    }
  }

  {
    const json& d = doc["domain"];
    check_keys(d, "domain", {"x_lo", "x_hi", "boundary"});
    cfg.domain.x_lo = as_number(member(d, "domain", "x_lo"), "domain.x_lo");
    cfg.domain.x_hi = as_number(member(d, "domain", "x_hi"), "domain.x_hi");
    if (!(cfg.domain.x_lo < cfg.domain.x_hi))
      fail("domain", "x_lo must be below x_hi");
    const std::string bc =
        as_string(member(d, "domain", "boundary"), "domain.boundary");
    if (bc == "periodic")
      cfg.domain.boundary = BoundaryKind::periodic;
    else if (bc == "free_flow")
      cfg.domain.boundary = BoundaryKind::free_flow;
    else
      fail("domain.boundary", "unknown boundary '" + bc + "'");
  }

  {
    const json& m = doc["mesh"];
    check_keys(m, "mesh", {"cells_per_dim", "max_level", "mode"});
    cfg.mesh.cells_per_dim = as_int(member(m, "mesh", "cells_per_dim"),
                                    "mesh.cells_per_dim");
    require_in(cfg.mesh.cells_per_dim, 1, 4096, "mesh.cells_per_dim");
    cfg.mesh.max_level = as_int(member(m, "mesh", "max_level"),
                                "mesh.max_level");
    require_in(cfg.mesh.max_level, 0, 16, "mesh.max_level");
    const std::string mode = as_string(member(m, "mesh", "mode"), "mesh.mode");
    if (mode == "adaptive")
      cfg.mesh.mode = RunMode::adaptive;
    else if (mode == "uniform")
      cfg.mesh.mode = RunMode::uniform;
    else
      fail("mesh.mode", "unknown mode '" + mode + "'");
  }

  {
    const json& t = doc["tolerances"];
    check_keys(t, "tolerances",
               {"eps_per_dt", "eps_aniso", "coarsen_frac", "c_ref"});
    cfg.tolerances.eps_per_dt = as_number(member(t, "tolerances", "eps_per_dt"),
                                          "tolerances.eps_per_dt");
    if (!(cfg.tolerances.eps_per_dt > 0))
      fail("tolerances.eps_per_dt", "must be positive");
    cfg.tolerances.eps_aniso =
        as_number(member(t, "tolerances", "eps_aniso"), "tolerances.eps_aniso");
    require_in(cfg.tolerances.eps_aniso, -1.0, 0.999999,
               "tolerances.eps_aniso");
    cfg.tolerances.coarsen_frac = as_number(
        member(t, "tolerances", "coarsen_frac"), "tolerances.coarsen_frac");
    require_in(cfg.tolerances.coarsen_frac, 0.0, 0.999999,
               "tolerances.coarsen_frac");
    cfg.tolerances.c_ref =
        as_number(member(t, "tolerances", "c_ref"), "tolerances.c_ref");
    if (!(cfg.tolerances.c_ref > 0)) fail("tolerances.c_ref", "must be positive");
  }

  {
    const json& s = doc["stepper"];
    check_keys(s, "stepper", {"t_end", "cfl", "dt_cap"});
    cfg.stepper.t_end =
        as_number(member(s, "stepper", "t_end"), "stepper.t_end");
    if (!(cfg.stepper.t_end >= 0)) fail("stepper.t_end", "must be nonnegative");
    cfg.stepper.cfl = as_number(member(s, "stepper", "cfl"), "stepper.cfl");
    require_in(cfg.stepper.cfl, 1e-6, 1.0, "stepper.cfl");
    cfg.stepper.dt_cap =
        as_number(member(s, "stepper", "dt_cap"), "stepper.dt_cap");
    if (cfg.stepper.dt_cap < 0) fail("stepper.dt_cap", "must be nonnegative");
  }

  {
    const json& r = doc["reconstruction"];
    check_keys(r, "reconstruction", {"high", "low", "limiter", "quad_pts"});
    cfg.recon.high = parse_recon_kind(
        as_string(member(r, "reconstruction", "high"), "reconstruction.high"),
        "reconstruction.high");
    cfg.recon.low = parse_recon_kind(
        as_string(member(r, "reconstruction", "low"), "reconstruction.low"),
        "reconstruction.low");
    const std::string lim = as_string(member(r, "reconstruction", "limiter"),
                                      "reconstruction.limiter");
    if (lim == "minmod")
      cfg.recon.lim = Limiter::minmod;
    else if (lim == "van_leer")
      cfg.recon.lim = Limiter::van_leer;
    else
      fail("reconstruction.limiter", "unknown limiter '" + lim + "'");
    cfg.recon.quad_pts = as_int(member(r, "reconstruction", "quad_pts"),
                                "reconstruction.quad_pts");
    require_in(cfg.recon.quad_pts, 2, 12, "reconstruction.quad_pts");
  }

  {
    const json& o = doc["outputs"];
    check_keys(o, "outputs",
               {"probes", "pdf_samples", "pdf_grid", "pdf_probes", "out_dir"});
    cfg.outputs.probes = as_int(member(o, "outputs", "probes"),
                                "outputs.probes");
    require_in(cfg.outputs.probes, 2, 100000, "outputs.probes");
    cfg.outputs.pdf_samples = as_int(member(o, "outputs", "pdf_samples"),
                                     "outputs.pdf_samples");
    require_in(cfg.outputs.pdf_samples, 16, 1 << 20, "outputs.pdf_samples");
    cfg.outputs.pdf_grid =
        as_int(member(o, "outputs", "pdf_grid"), "outputs.pdf_grid");
    require_in(cfg.outputs.pdf_grid, 8, 1 << 16, "outputs.pdf_grid");
    const json& probes = member(o, "outputs", "pdf_probes");
    if (!probes.is_array()) fail("outputs.pdf_probes", "expected an array");
    for (const json& v : probes) {
      const double x = as_number(v, "outputs.pdf_probes[]");
      require_in(x, cfg.domain.x_lo, cfg.domain.x_hi, "outputs.pdf_probes[]");
      cfg.outputs.pdf_probes.push_back(x);
    }
    cfg.outputs.out_dir =
        as_string(member(o, "outputs", "out_dir"), "outputs.out_dir");
  }

  if (cfg.problem == "transport" && cfg.law.kind != LawKind::advection)
    fail("law.kind", "transport runs an advection law");
  if (cfg.problem == "burgers_sine" && cfg.law.kind != LawKind::burgers)
    fail("law.kind", "burgers_sine runs the Burgers law");
  if (cfg.problem == "euler_three_state" && cfg.law.kind != LawKind::euler)
    fail("law.kind", "euler_three_state runs the Euler system");
  return cfg;
}

void apply_override(json& doc, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    fail("override", "expected key=value, got '" + spec + "'");
  const std::string path = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot - pos);
    if (key.empty()) fail("override", "empty path component in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["problem"] = cfg.y_constant
                     ? json{{"id", cfg.problem}, {"y_constant", true}}
                     : json(cfg.problem);
  switch (cfg.law.kind) {
    case LawKind::advection:
      j["law"] = {{"kind", "advection"}, {"speed", cfg.law.speed}};
      break;
    case LawKind::burgers:
      j["law"] = {{"kind", "burgers"}};
      break;
    case LawKind::euler:
      j["law"] = {{"kind", "euler"}, {"gamma", cfg.law.gamma}};
      break;
  }
  switch (cfg.measure.kind) {
    case MeasureKind::uniform:
      j["measure"] = {{"kind", "uniform"},
                      {"a", cfg.measure.a},
                      {"b", cfg.measure.b}};
      break;
    case MeasureKind::beta:
      j["measure"] = {{"kind", "beta"},
                      {"alpha", cfg.measure.alpha},
                      {"beta", cfg.measure.beta}};
      break;
    case MeasureKind::truncated_normal:
      j["measure"] = {{"kind", "truncated_normal"},
                      {"mean", cfg.measure.mean},
                      {"sd", cfg.measure.sd},
                      {"a", cfg.measure.a},
                      {"b", cfg.measure.b}};
      break;
  }
  j["domain"] = {{"x_lo", cfg.domain.x_lo},
                 {"x_hi", cfg.domain.x_hi},
                 {"boundary", cfg.domain.boundary == BoundaryKind::periodic
                                  ? "periodic"
                                  : "free_flow"}};
  j["mesh"] = {{"cells_per_dim", cfg.mesh.cells_per_dim},
               {"max_level", cfg.mesh.max_level},
               {"mode",
                cfg.mesh.mode == RunMode::adaptive ? "adaptive" : "uniform"}};
  j["tolerances"] = {{"eps_per_dt", cfg.tolerances.eps_per_dt},
                     {"eps_aniso", cfg.tolerances.eps_aniso},
                     {"coarsen_frac", cfg.tolerances.coarsen_frac},
                     {"c_ref", cfg.tolerances.c_ref}};
  j["stepper"] = {{"t_end", cfg.stepper.t_end},
                  {"cfl", cfg.stepper.cfl},
                  {"dt_cap", cfg.stepper.dt_cap}};
  j["reconstruction"] = {{"high", recon_name(cfg.recon.high)},
                         {"low", recon_name(cfg.recon.low)},
                         {"limiter", cfg.recon.lim == Limiter::minmod
                                         ? "minmod"
                                         : "van_leer"},
                         {"quad_pts", cfg.recon.quad_pts}};
  j["outputs"] = {{"probes", cfg.outputs.probes},
                  {"pdf_samples", cfg.outputs.pdf_samples},
                  {"pdf_grid", cfg.outputs.pdf_grid},
                  {"pdf_probes", cfg.outputs.pdf_probes},
                  {"out_dir", cfg.outputs.out_dir}};
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  json j = config_to_json(cfg);
  j["outputs"].erase("out_dir");  // identity covers the physics, not the path
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

}  // namespace sfv
