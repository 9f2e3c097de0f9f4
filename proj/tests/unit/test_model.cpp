#include "doctest.h"

#include "gravinv/errors.hpp"
#include "gravinv/model.hpp"
#include "support.hpp"

using namespace gravinv;
using doctest::Approx;

TEST_CASE("gamma matches the rounded reciprocal of the mass relations") {
  CHECK(PhysicalConstants::inverse_gamma == Approx(0.15).epsilon(0.002));
  CHECK(std::abs(kGamma * 0.15 - 1.0) < 0.002);
}

TEST_CASE("spheroid mass") {
  // (4/3) pi 0.51 1.6 2.75^3 evaluated by hand: 71.09.
  CHECK(spheroid_mass({2.75, 0.51, 1.6, 0, 0, 5}) == Approx(71.09).epsilon(1e-3));
  CHECK(spheroid_mass({1.0, 1.0, 3.0 / (4.0 * kPi), 0, 0, 5}) == Approx(1.0).epsilon(1e-15));
  // Reference solution row of the first body: a 2.52, eps 0.595, rho 1.69, M 67.50.
  CHECK(spheroid_mass({2.52, 0.595, 1.69, 0, 0, 5}) == Approx(67.5).epsilon(0.005));
}

TEST_CASE("semiaxis from mass") {
  CHECK(semiaxis_from_mass(67.50, 0.595, 1.69) == Approx(2.52).epsilon(0.002));
  CHECK(semiaxis_from_mass(48.50, 2.035, 2.65) == Approx(1.29).epsilon(0.002));
  CHECK(semiaxis_from_mass(4.0 / 3.0 * kPi, 1.0, 1.0) == Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(semiaxis_from_mass(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(semiaxis_from_mass(1.0, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(semiaxis_from_mass(1.0, 1.0, 0.0), DomainError);
}

TEST_CASE("mass and semiaxis round trip") {
  testing::Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Spheroid s{rng.uniform(0.1, 5.0), rng.uniform(0.1, 3.0), rng.uniform(0.5, 4.0), 0, 0, 20};
    CHECK(testing::rel_diff(semiaxis_from_mass(spheroid_mass(s), s.eps, s.rho), s.a) < 1e-12);
  }
}

TEST_CASE("validation") {
  CHECK_NOTHROW(validate(Spheroid{1.0, 1.0, 2.0, 0, 0, 1.5}));
  CHECK_THROWS_AS(validate(Spheroid{1.0, 1.0, 2.0, 0, 0, 1.0}), ValidationError);  // touches surface
  CHECK_THROWS_AS(validate(Spheroid{1.0, 2.0, 2.0, 0, 0, 1.5}), ValidationError);  // c = 2 > z0
  CHECK_THROWS_AS(validate(Spheroid{-1.0, 1.0, 2.0, 0, 0, 5}), ValidationError);
  CHECK_NOTHROW(validate(Spheroid{1.0, 1.0, -0.3, 0, 0, 5}));  // density deficit

  BarCell cell{0, 0, 1, 1, {{1, 2}}};
  CHECK_NOTHROW(validate(cell));
  cell.segments = {{1, 2}, {1.5, 3}};
  CHECK_THROWS_AS(validate(cell), ValidationError);
  cell.segments = {{0, 2}};
  CHECK_THROWS_AS(validate(cell), ValidationError);
  cell.segments = {};
  CHECK_THROWS_AS(validate(cell), ValidationError);
  CHECK_THROWS_AS(validate(BarCell{0, 0, 0, 1, {{1, 2}}}), ValidationError);
  CHECK_THROWS_AS(validate(BarBody{1.0, {}}), ValidationError);
  CHECK_THROWS_AS(validate(Station{std::nan(""), 0, {}}), ValidationError);
}
