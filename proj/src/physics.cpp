#include "sfv/physics.hpp"

#include <algorithm>
#include <cmath>

namespace sfv {

ConservationLaw make_advection(double speed) {
  ConservationLaw law;
  law.kind = LawKind::advection;
  law.components = 1;
  law.advection_speed = speed;
  return law;
}

ConservationLaw make_burgers() {
  ConservationLaw law;
  law.kind = LawKind::burgers;
  law.components = 1;
  return law;
}

ConservationLaw make_euler(double gamma) {
  if (!(gamma > 1.0)) throw ConfigError("euler law needs gamma > 1");
  ConservationLaw law;
  law.kind = LawKind::euler;
  law.components = 3;
  law.gamma = gamma;
  return law;
}

double euler_pressure(const ConservationLaw& law, const State& u) {
  double rho = u[0], mom = u[1], E = u[2];
  return (law.gamma - 1.0) * (E - 0.5 * mom * mom / rho);
}

double euler_sound_speed(const ConservationLaw& law, const State& u) {
  return std::sqrt(law.gamma * euler_pressure(law, u) / u[0]);
}

bool admissible(const ConservationLaw& law, const State& u) {
  if (law.kind != LawKind::euler) return std::isfinite(u[0]);
  if (!(u[0] > 0.0)) return false;
  return euler_pressure(law, u) > 0.0 && std::isfinite(u[2]);
}

State flux(const ConservationLaw& law, const State& u) {
  State f{};
  switch (law.kind) {
    case LawKind::advection:
      f[0] = law.advection_speed * u[0];
      break;
    case LawKind::burgers:
      f[0] = 0.5 * u[0] * u[0];
      break;
    case LawKind::euler: {
      if (!admissible(law, u))
        throw PositivityError("euler flux at inadmissible state", 0xffffffffu);
      double rho = u[0], mom = u[1], E = u[2];
      double v = mom / rho;
      double p = euler_pressure(law, u);
      f[0] = mom;
      f[1] = mom * v + p;
      f[2] = v * (E + p);
      break;
    }
  }
  return f;
}

double max_wave_speed(const ConservationLaw& law, const State& u) {
  switch (law.kind) {
    case LawKind::advection:
      return std::fabs(law.advection_speed);
    case LawKind::burgers:
      return std::fabs(u[0]);
    case LawKind::euler: {
      if (!admissible(law, u))
        throw PositivityError("euler wave speed at inadmissible state", 0xffffffffu);
      return std::fabs(u[1] / u[0]) + euler_sound_speed(law, u);
    }
  }
  return 0.0;
}

State rusanov(const ConservationLaw& law, const State& ul, const State& ur) {
  State fl = flux(law, ul);
  State fr = flux(law, ur);
  double s = std::max(max_wave_speed(law, ul), max_wave_speed(law, ur));
  State f{};
  for (int c = 0; c < law.components; ++c)
    f[c] = 0.5 * (fl[c] + fr[c]) - 0.5 * s * (ur[c] - ul[c]);
  return f;
}

}  // namespace sfv
