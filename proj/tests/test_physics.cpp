#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sfv/physics.hpp"
#include "test_support.hpp"

using namespace sfv;

TEST_CASE("advection flux and wave speed") {
  auto law = make_advection(1.0);
  CHECK(flux(law, {2.0})[0] == doctest::Approx(2.0));
  CHECK(max_wave_speed(law, {2.0}) == doctest::Approx(1.0));
  auto neg = make_advection(-3.0);
  CHECK(flux(neg, {2.0})[0] == doctest::Approx(-6.0));
  CHECK(max_wave_speed(neg, {0.0}) == doctest::Approx(3.0));
}

TEST_CASE("burgers flux and wave speed") {
  auto law = make_burgers();
  CHECK(flux(law, {3.0})[0] == doctest::Approx(4.5));
  CHECK(flux(law, {-2.0})[0] == doctest::Approx(2.0));
  CHECK(max_wave_speed(law, {-2.0}) == doctest::Approx(2.0));
}

TEST_CASE("euler pressure, sound speed, flux on reference states") {
  auto law = make_euler(1.4);
  State left{1.0, 0.0, 2.5};
  CHECK(euler_pressure(law, left) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(euler_sound_speed(law, left) ==
        doctest::Approx(std::sqrt(1.4)).epsilon(1e-14));
  State f = flux(law, left);
  CHECK(f[0] == doctest::Approx(0.0));
  CHECK(f[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f[2] == doctest::Approx(0.0));

  State mid{0.125, 0.0, 0.25};
  CHECK(euler_pressure(law, mid) == doctest::Approx(0.1).epsilon(1e-14));

  // Moving state, cross-checked against the definition.
  State mv{0.5, 0.7, 1.9};
  double v = 0.7 / 0.5;
  double p = 0.4 * (1.9 - 0.5 * 0.7 * 0.7 / 0.5);
  State fm = flux(law, mv);
  CHECK(fm[0] == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(fm[1] == doctest::Approx(0.7 * v + p).epsilon(1e-14));
  CHECK(fm[2] == doctest::Approx(v * (1.9 + p)).epsilon(1e-14));
  CHECK(max_wave_speed(law, mv) ==
        doctest::Approx(std::fabs(v) + std::sqrt(1.4 * p / 0.5)).epsilon(1e-14));
}

TEST_CASE("euler positivity violations throw") {
  auto law = make_euler(1.4);
  CHECK_FALSE(admissible(law, {-1.0, 0.0, 1.0}));
  CHECK_FALSE(admissible(law, {1.0, 3.0, 1.0}));  // kinetic energy exceeds total
  CHECK(admissible(law, {1.0, 0.0, 2.5}));
  CHECK_THROWS_AS(flux(law, {0.0, 0.0, 1.0}), PositivityError);
  CHECK_THROWS_AS(max_wave_speed(law, {1.0, 4.0, 1.0}), PositivityError);
  CHECK_THROWS_AS(make_euler(1.0), ConfigError);
}

TEST_CASE("rusanov flux hand values") {
  auto adv = make_advection(1.0);
  CHECK(rusanov(adv, {1.0}, {0.0})[0] == doctest::Approx(1.0).epsilon(1e-14));
  auto bur = make_burgers();
  CHECK(rusanov(bur, {1.0}, {0.0})[0] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("rusanov is consistent: F(u,u) = F(u)") {
  testsup::Rng rng(3);
  auto bur = make_burgers();
  auto euler = make_euler(1.4);
  for (int i = 0; i < 100; ++i) {
    State u{rng.uniform(-2.0, 2.0)};
    CHECK(rusanov(bur, u, u)[0] == doctest::Approx(flux(bur, u)[0]).epsilon(1e-14));
    State e{rng.uniform(0.1, 2.0), rng.uniform(-1.0, 1.0), 0.0};
    e[2] = 0.5 * e[1] * e[1] / e[0] + rng.uniform(0.1, 3.0);  // positive pressure
    State fe = flux(euler, e);
    State re = rusanov(euler, e, e);
    for (int c = 0; c < 3; ++c)
      CHECK(re[c] == doctest::Approx(fe[c]).epsilon(1e-13).scale(1.0));
  }
}

TEST_CASE("rusanov dissipation sign damps jumps") {
  // For advection with a = 0 the flux reduces to pure dissipation, negative
  // for an upward jump.
  auto law = make_advection(0.0);
  CHECK(rusanov(law, {0.0}, {2.0})[0] == doctest::Approx(0.0));
  auto bur = make_burgers();
  double f = rusanov(bur, {-1.0}, {1.0})[0];
  // F(-1)=F(1)=0.5, s=1: f = 0.5 - 1.0 = -0.5.
  CHECK(f == doctest::Approx(-0.5).epsilon(1e-14));
}
