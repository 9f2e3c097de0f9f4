#pragma once

// Line-oriented text formats. Numbers are written with 17 significant
// digits so that a write/read round trip is exact. '#' starts a comment
// line; blank lines are ignored except in constraint files, where they
// separate bodies.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gravinv/bulakh.hpp"
#include "gravinv/detect.hpp"
#include "gravinv/forward.hpp"
#include "gravinv/invert.hpp"
#include "gravinv/synth.hpp"

namespace gravinv {

std::string format_number(double v);

/// Stations: `x_km y_km [vz_mgal]` per line.
std::vector<Station> read_stations(std::istream& in, const std::string& source = "<stations>");
void write_stations(std::ostream& out, std::span<const Station> stations);

/// Spheroids: `a eps rho x0 y0 z0` per line.
std::vector<Spheroid> read_spheroids(std::istream& in, const std::string& source = "<model>");
void write_spheroids(std::ostream& out, std::span<const Spheroid> bodies);

/// Bar bodies: a `body rho ncells` header followed by ncells lines
/// `xc yc dx dy nseg z1min z1max [z2min z2max ...]`.
std::vector<BarBody> read_bar_bodies(std::istream& in, const std::string& source = "<model>");
void write_bar_bodies(std::ostream& out, std::span<const BarBody> bodies);

/// Either model format, told apart by a leading `body` keyword.
std::vector<Body> read_model(std::istream& in, const std::string& source = "<model>");

/// Constraint blocks, one per body, separated by blank lines. Each block
/// holds `name pmin pmax` for eps, rho, x0, y0, z0 in any order and an
/// optional `mass value` line.
struct Constraints {
  ParameterBox box;
  std::vector<double> masses;  // empty unless every block has a mass line
};
Constraints read_constraints(std::istream& in, const std::string& source = "<constraints>");
void write_constraints(std::ostream& out, const ParameterBox& box, std::span<const double> masses = {});

/// Grid: `# grid xmin xmax ymin ymax nx ny` header, then `x y vz` rows with
/// x varying fastest.
FieldGrid read_grid(std::istream& in, const std::string& source = "<grid>");
void write_grid(std::ostream& out, const FieldGrid& grid);

/// Exact scenario rows: `a eps rho x0 y0 z0 volume mass`.
std::vector<ExactParams> read_exact(std::istream& in, const std::string& source = "<exact>");
void write_exact(std::ostream& out, std::span<const ExactParams> rows);

void write_peaks(std::ostream& out, std::span<const PeakCandidate> peaks);
void write_estimates(std::ostream& out, std::span<const PeakCandidate> peaks,
                     std::span<const DepthMassEstimate> estimates);
void write_inversion(std::ostream& out, const InversionResult& result);
void write_pipeline(std::ostream& out, const PipelineResult& result);

/// Opens `path` for reading and parses it with `reader`; a missing file is
/// reported as a ParseError at line 0.
template <typename Reader>
auto read_file(const std::filesystem::path& path, Reader reader);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace gravinv

#include <fstream>

namespace gravinv {

template <typename Reader>
auto read_file(const std::filesystem::path& path, Reader reader) {
  auto in = open_input(path);
  return reader(in, path.string());
}

}  // namespace gravinv
