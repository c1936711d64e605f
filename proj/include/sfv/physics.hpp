#pragma once

#include <array>
#include <string>

#include "sfv/errors.hpp"

namespace sfv {

// Component vector for the largest system handled (1-D Euler).  Solvers use
// the first `components` entries and ignore the rest.
inline constexpr int kMaxComp = 3;
using State = std::array<double, kMaxComp>;

enum class LawKind { advection, burgers, euler };

// One-dimensional conservation law F in  u_t + F(u)_x = 0.
// advection: F = a u;  burgers: F = u^2/2;
// euler: u = (rho, rho v, rho E), F = (rho v, rho v^2 + p, v(rho E + p))
// with ideal-gas pressure p = (gamma - 1)(rho E - rho v^2 / 2).
struct ConservationLaw {
  LawKind kind = LawKind::advection;
  int components = 1;
  double advection_speed = 1.0;
  double gamma = 1.4;
};

ConservationLaw make_advection(double speed);
ConservationLaw make_burgers();
ConservationLaw make_euler(double gamma);

double euler_pressure(const ConservationLaw& law, const State& u);
double euler_sound_speed(const ConservationLaw& law, const State& u);

// True when the state is physically evaluable (always for scalar laws; for
// Euler: positive density and pressure).
bool admissible(const ConservationLaw& law, const State& u);

// Flux vector; throws PositivityError for inadmissible Euler states.
State flux(const ConservationLaw& law, const State& u);

// Largest signal speed |dF/du| at the state: |a|, |u|, or |v| + c.
double max_wave_speed(const ConservationLaw& law, const State& u);

// Rusanov (local Lax-Friedrichs) numerical flux for the face value pair:
// 1/2 (F(uL) + F(uR)) - s/2 (uR - uL), s = max of the two wave speeds.
State rusanov(const ConservationLaw& law, const State& ul, const State& ur);

}  // namespace sfv
