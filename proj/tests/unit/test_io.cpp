#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gravinv/errors.hpp"
#include "gravinv/io.hpp"
#include "support.hpp"

using namespace gravinv;

namespace {

template <typename Fn>
ParseError parse_failure(Fn fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("no ParseError");
  return ParseError("", 0, 0, "");
}

std::vector<Station> parse_stations(const std::string& text) {
  std::istringstream in(text);
  return read_stations(in);
}

Constraints parse_constraints(const std::string& text) {
  std::istringstream in(text);
  return read_constraints(in);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("number formatting is exact") {
  testing::Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.uniform(-60, 60)));
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(3.0) == "3");
}

TEST_CASE("stations round trip") {
  testing::Rng rng(8);
  std::vector<Station> stations;
  for (int i = 0; i < 50; ++i) stations.push_back({rng.uniform(0, 15), rng.uniform(0, 15), rng.uniform(-1, 30)});
  std::stringstream buf;
  write_stations(buf, stations);
  const auto back = read_stations(buf);
  REQUIRE(back.size() == stations.size());
  for (std::size_t i = 0; i < stations.size(); ++i) {
    CHECK(back[i].x == stations[i].x);
    CHECK(back[i].y == stations[i].y);
    CHECK(*back[i].vz == *stations[i].vz);
  }

  const auto mixed = parse_stations("# header\n1 2\n\n3,4,5.5\n  6\t7 \n");
  REQUIRE(mixed.size() == 3);
  CHECK_FALSE(mixed[0].vz);
  CHECK(*mixed[1].vz == 5.5);
  CHECK(mixed[2].y == 7.0);
}

TEST_CASE("spheroids and bar bodies round trip") {
  const std::vector<Spheroid> bodies{{2.648, 0.51, 1.6, 5.7, 5.3, 4.2}, {1.3, 1.96, 2.6, 10.7, 11.1, 3.8}};
  std::stringstream s1;
  write_spheroids(s1, bodies);
  const auto back = read_spheroids(s1);
  REQUIRE(back.size() == 2);
  CHECK(back[1].a == bodies[1].a);
  CHECK(back[0].z0 == bodies[0].z0);

  const auto bars = std::vector<BarBody>{discretize_spheroid_to_bars(bodies[0], 0.5),
                                         discretize_spheroid_to_bars(bodies[1], 0.25)};
  std::stringstream s2;
  write_bar_bodies(s2, bars);
  const std::string text = s2.str();
  std::istringstream in2(text);
  const auto bars_back = read_bar_bodies(in2);
  REQUIRE(bars_back.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(bars_back[k].rho == bars[k].rho);
    REQUIRE(bars_back[k].cells.size() == bars[k].cells.size());
    CHECK(bar_volume(bars_back[k]) == bar_volume(bars[k]));
  }

  std::istringstream as_model(text);
  const auto model = read_model(as_model);
  REQUIRE(model.size() == 2);
  CHECK(std::holds_alternative<BarBody>(model[0]));
  std::stringstream s3;
  write_spheroids(s3, bodies);
  const auto model2 = read_model(s3);
  REQUIRE(model2.size() == 2);
  CHECK(std::holds_alternative<Spheroid>(model2[1]));
}

TEST_CASE("constraints round trip") {
  const std::vector<BodyBounds> bounds{{0.2, 0.6, 1.1, 1.7, 5.4, 6.0, 5.2, 6.0, 3.9, 4.5},
                                       {1.5, 2.2, 2.2, 2.8, 10.5, 11.0, 10.9, 11.3, 3.6, 4.2}};
  const auto box = ParameterBox::from_bodies(bounds);
  std::stringstream s;
  write_constraints(s, box);
  const auto back = read_constraints(s);
  CHECK(back.box.p_min == box.p_min);
  CHECK(back.box.p_max == box.p_max);
  CHECK(back.box.names == box.names);
  CHECK(back.masses.empty());

  std::stringstream with_mass;
  const std::vector<double> masses{63.47, 49.56};
  write_constraints(with_mass, box, masses);
  CHECK(read_constraints(with_mass).masses == masses);

  // Parameter order inside a block is free.
  const auto shuffled = parse_constraints("z0 1 2\nx0 0 1\ny0 0 1\nrho 1 2\neps 0.5 1\n");
  CHECK(shuffled.box.p_min == std::vector<double>{0.5, 1, 0, 0, 1});
}

TEST_CASE("grid round trip") {
  FieldGrid g;
  g.x_min = -1.0;
  g.x_max = 2.0;
  g.y_min = 0.0;
  g.y_max = 1.0;
  g.nx = 4;
  g.ny = 3;
  for (std::size_t i = 0; i < 12; ++i) g.values.push_back(0.1 * static_cast<double>(i * i));
  std::stringstream s;
  write_grid(s, g);
  const auto back = read_grid(s);
  CHECK(back.nx == 4);
  CHECK(back.ny == 3);
  CHECK(back.x_min == g.x_min);
  CHECK(back.values == g.values);

  std::istringstream off("# grid 0 1 0 1 2 2\n0 0 1\n0.5 0 1\n0 1 1\n1 1 1\n");
  const auto e = parse_failure([&] { read_grid(off); });
  CHECK(e.line() == 3);
  std::istringstream shortg("# grid 0 1 0 1 2 2\n0 0 1\n");
  CHECK(parse_failure([&] { read_grid(shortg); }).line() == 3);
  std::istringstream noheader("0 0 1\n");
  CHECK_THROWS_AS(read_grid(noheader), ParseError);
}

TEST_CASE("exact rows round trip") {
  const auto sc = scenario("example2");
  std::stringstream s;
  write_exact(s, sc.exact_params);
  const auto back = read_exact(s);
  REQUIRE(back.size() == sc.exact_params.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].a == sc.exact_params[k].a);
    CHECK(back[k].mass == sc.exact_params[k].mass);
  }
}

TEST_CASE("parse errors carry line and column") {
  auto e = parse_failure([] { parse_stations("1 2\n3 x4\n"); });
  CHECK(e.line() == 2);
  CHECK(e.column() == 3);

  e = parse_failure([] { parse_stations("# c\n1 2 3 4\n"); });
  CHECK(e.line() == 2);
  CHECK(e.column() == 7);

  e = parse_failure([] { parse_stations("1\n"); });
  CHECK(e.line() == 1);

  e = parse_failure([] { parse_stations("1 2 inf\n"); });
  CHECK(e.column() == 5);

  // Semantic failures point at the record.
  e = parse_failure([] {
    std::istringstream in("1 1 2 5 5 3\n1 1 2 5 5 0.5\n");
    read_spheroids(in);
  });
  CHECK(e.line() == 2);

  e = parse_failure([] {
    std::istringstream in("body 2 2\n0 0 1 1 1 0.5 1\n");
    read_bar_bodies(in);
  });
  CHECK(e.line() == 3);

  e = parse_failure([] { parse_constraints("eps 0.5 1\nrho 1 2\nx0 0 1\ny0 0 1\nz0 1 2\neps 0.1 0.2\n"); });
  CHECK(e.line() == 6);
  e = parse_failure([] { parse_constraints("eps 0.5 1\nrho 2 1\n"); });
  CHECK(e.line() == 2);
  e = parse_failure([] { parse_constraints("eps 0.5 1\n\nrho 1 2\n"); });
  CHECK(e.line() == 1);
  e = parse_failure([] { parse_constraints("depth 1 2\n"); });
  CHECK(e.column() == 1);
  CHECK_THROWS_AS(parse_constraints("# only a comment\n"), ParseError);
  CHECK_THROWS_AS(parse_constraints("eps 0.5 1\nrho 1 2\nx0 0 1\ny0 0 1\nz0 1 2\nmass 3\n\n"
                                    "eps 0.5 1\nrho 1 2\nx0 0 1\ny0 0 1\nz0 1 2\n"),
                  ParseError);

  const auto missing = parse_failure([] { read_file("/nonexistent/stations.txt", read_stations); });
  CHECK(missing.line() == 0);
}

TEST_CASE("shipped data matches the scenarios") {
  const std::filesystem::path data = GRAVINV_DATA_DIR;
  for (const std::string name : {"example1", "example2"}) {
    CAPTURE(name);
    const auto sc = scenario(name);
    std::ostringstream model, stations, survey, exact;
    write_bar_bodies(model, sc.bodies);
    write_stations(stations, sc.stations);
    const auto surveyed = simulate_survey(sc);
    write_stations(survey, surveyed);
    write_exact(exact, sc.exact_params);
    CHECK(slurp(data / name / "model.txt") == model.str());
    CHECK(slurp(data / name / "stations.txt") == stations.str());
    CHECK(slurp(data / name / "survey.txt") == survey.str());
    CHECK(slurp(data / name / "exact.txt") == exact.str());
    if (!sc.reference_bounds.empty()) {
      std::ostringstream constraints;
      write_constraints(constraints, ParameterBox::from_bodies(sc.reference_bounds));
      CHECK(slurp(data / name / "constraints.txt") == constraints.str());
    }
  }
}
