#include "gravinv/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string_view>
#include <tuple>

#include "gravinv/errors.hpp"

namespace gravinv {

namespace {

struct Token {
  std::string_view text;
  std::size_t column = 0;  // 1-based
};

bool is_separator(char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r'; }

std::vector<Token> split(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_separator(line[i])) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && !is_separator(line[i])) ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

// Reads a text stream line by line, keeping the line number for
// diagnostics.
class LineReader {
public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Next line as tokens. Comment lines come back empty unless
  // `keep_comments` is set; blank lines always come back empty.
  std::optional<std::vector<Token>> next(bool keep_comments = false) {
    if (!std::getline(in_, line_)) return std::nullopt;
    ++number_;
    auto tokens = split(line_);
    if (!keep_comments && !tokens.empty() && tokens.front().text.front() == '#') tokens.clear();
    return tokens;
  }

  // Next line with content, skipping blanks and comments.
  std::optional<std::vector<Token>> next_content() {
    while (auto t = next()) {
      if (!t->empty()) return t;
    }
    return std::nullopt;
  }

  [[noreturn]] void fail(std::size_t column, const std::string& what) const {
    throw ParseError(source_, number_, column, what);
  }

  [[noreturn]] void fail_eof(const std::string& what) const {
    throw ParseError(source_, number_ + 1, 1, what);
  }

  double number(const Token& t) const {
    double v = 0.0;
    const char* first = t.text.data();
    const char* last = first + t.text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc::result_out_of_range) fail(t.column, "number out of range: " + std::string(t.text));
    if (ec != std::errc() || ptr != last) fail(t.column + static_cast<std::size_t>(ptr - t.text.data()),
                                               "expected a number, got '" + std::string(t.text) + "'");
    if (!std::isfinite(v)) fail(t.column, "number must be finite: " + std::string(t.text));
    return v;
  }

  std::size_t count(const Token& t) const {
    std::size_t v = 0;
    const char* first = t.text.data();
    const char* last = first + t.text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      fail(t.column, "expected a non-negative integer, got '" + std::string(t.text) + "'");
    }
    return v;
  }

  void expect_fields(const std::vector<Token>& t, std::size_t lo, std::size_t hi,
                     const std::string& layout) const {
    if (t.size() < lo) fail(t.empty() ? 1 : t.back().column + t.back().text.size(),
                            "expected " + layout);
    if (t.size() > hi) fail(t[hi].column, "unexpected field, expected " + layout);
  }

  // Checks a parsed record, turning a semantic failure into a parse error
  // that points at the offending line.
  template <typename T>
  void check(const T& value) const {
    try {
      validate(value);
    } catch (const ValidationError& e) {
      fail(1, e.what());
    }
  }

  std::size_t line() const { return number_; }

private:
  std::istream& in_;
  std::string source_;
  std::string line_;
  std::size_t number_ = 0;
};

void put(std::ostream& out, double v) { out << format_number(v); }

template <typename... Ts>
void row(std::ostream& out, double first, Ts... rest) {
  put(out, first);
  ((out << ' ', put(out, rest)), ...);
  out << '\n';
}

const char* functional_name(Functional f) { return f == Functional::f1 ? "F1" : "F2"; }

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Station> read_stations(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::vector<Station> out;
  while (auto t = r.next_content()) {
    r.expect_fields(*t, 2, 3, "x y [vz]");
    Station s{r.number((*t)[0]), r.number((*t)[1]), {}};
    if (t->size() == 3) s.vz = r.number((*t)[2]);
    out.push_back(s);
  }
  return out;
}

void write_stations(std::ostream& out, std::span<const Station> stations) {
  bool any_vz = false;
  for (const auto& s : stations) any_vz = any_vz || s.vz.has_value();
  out << (any_vz ? "# x_km y_km vz_mgal\n" : "# x_km y_km\n");
  for (const auto& s : stations) {
    if (s.vz) {
      row(out, s.x, s.y, *s.vz);
    } else {
      row(out, s.x, s.y);
    }
  }
}

std::vector<Spheroid> read_spheroids(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::vector<Spheroid> out;
  while (auto t = r.next_content()) {
    r.expect_fields(*t, 6, 6, "a eps rho x0 y0 z0");
    Spheroid s;
    s.a = r.number((*t)[0]);
    s.eps = r.number((*t)[1]);
    s.rho = r.number((*t)[2]);
    s.x0 = r.number((*t)[3]);
    s.y0 = r.number((*t)[4]);
    s.z0 = r.number((*t)[5]);
    r.check(s);
    out.push_back(s);
  }
  return out;
}

void write_spheroids(std::ostream& out, std::span<const Spheroid> bodies) {
  out << "# a eps rho x0 y0 z0\n";
  for (const auto& s : bodies) row(out, s.a, s.eps, s.rho, s.x0, s.y0, s.z0);
}

std::vector<BarBody> read_bar_bodies(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::vector<BarBody> out;
  while (auto t = r.next_content()) {
    if ((*t)[0].text != "body") r.fail((*t)[0].column, "expected 'body rho ncells'");
    r.expect_fields(*t, 3, 3, "body rho ncells");
    BarBody body;
    body.rho = r.number((*t)[1]);
    const std::size_t ncells = r.count((*t)[2]);
    const std::size_t header = r.line();
    for (std::size_t c = 0; c < ncells; ++c) {
      auto cell_line = r.next_content();
      if (!cell_line) r.fail_eof("body at line " + std::to_string(header) + " declares " +
                                 std::to_string(ncells) + " cells, found " + std::to_string(c));
      const auto& f = *cell_line;
      if (f[0].text == "body") r.fail(1, "body at line " + std::to_string(header) + " declares " +
                                             std::to_string(ncells) + " cells, found " +
                                             std::to_string(c));
      r.expect_fields(f, 5, f.size(), "xc yc dx dy nseg z1min z1max ...");
      BarCell cell;
      cell.xc = r.number(f[0]);
      cell.yc = r.number(f[1]);
      cell.dx = r.number(f[2]);
      cell.dy = r.number(f[3]);
      const std::size_t nseg = r.count(f[4]);
      r.expect_fields(f, 5 + 2 * nseg, 5 + 2 * nseg,
                      std::to_string(nseg) + " depth segments after nseg");
      for (std::size_t k = 0; k < nseg; ++k) {
        cell.segments.push_back({r.number(f[5 + 2 * k]), r.number(f[6 + 2 * k])});
      }
      r.check(cell);
      body.cells.push_back(std::move(cell));
    }
    r.check(body);
    out.push_back(std::move(body));
  }
  return out;
}

void write_bar_bodies(std::ostream& out, std::span<const BarBody> bodies) {
  out << "# body rho ncells / xc yc dx dy nseg z1min z1max ...\n";
  for (const auto& body : bodies) {
    out << "body " << format_number(body.rho) << ' ' << body.cells.size() << '\n';
    for (const auto& c : body.cells) {
      out << format_number(c.xc) << ' ' << format_number(c.yc) << ' ' << format_number(c.dx) << ' '
          << format_number(c.dy) << ' ' << c.segments.size();
      for (const auto& s : c.segments) out << ' ' << format_number(s.z_min) << ' ' << format_number(s.z_max);
      out << '\n';
    }
  }
}

std::vector<Body> read_model(std::istream& in, const std::string& source) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  bool bars = false;
  {
    std::istringstream probe(text);
    LineReader r(probe, source);
    if (auto t = r.next_content()) bars = (*t)[0].text == "body";
  }
  std::istringstream body_in(text);
  std::vector<Body> out;
  if (bars) {
    for (auto& b : read_bar_bodies(body_in, source)) out.emplace_back(std::move(b));
  } else {
    for (const auto& s : read_spheroids(body_in, source)) out.emplace_back(s);
  }
  return out;
}


Constraints read_constraints(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::vector<BodyBounds> bodies;
  std::vector<std::optional<double>> masses;
  std::map<std::string, std::pair<double, double>, std::less<>> block;
  std::optional<double> block_mass;
  std::size_t block_line = 0;

  auto close_block = [&] {
    if (block.empty() && !block_mass) return;
    for (std::size_t j = 0; j < kParamsPerBody; ++j) {
      const char* name = param_name(static_cast<Param>(j));
      if (!block.contains(name)) {
        throw ParseError(source, block_line, 1,
                         "body " + std::to_string(bodies.size() + 1) + " is missing '" + name + "'");
      }
    }
    BodyBounds b;
    std::tie(b.eps_min, b.eps_max) = block.at("eps");
    std::tie(b.rho_min, b.rho_max) = block.at("rho");
    std::tie(b.x0_min, b.x0_max) = block.at("x0");
    std::tie(b.y0_min, b.y0_max) = block.at("y0");
    std::tie(b.z0_min, b.z0_max) = block.at("z0");
    bodies.push_back(b);
    masses.push_back(block_mass);
    block.clear();
    block_mass.reset();
  };

  while (auto t = r.next(true)) {
    if (t->empty()) {
      close_block();
      continue;
    }
    if (t->front().text.front() == '#') continue;
    if (block.empty() && !block_mass) block_line = r.line();
    const auto& name = t->front();
    if (name.text == "mass") {
      r.expect_fields(*t, 2, 2, "mass value");
      if (block_mass) r.fail(name.column, "duplicate 'mass' in body block");
      block_mass = r.number((*t)[1]);
      if (!(*block_mass > 0.0)) r.fail((*t)[1].column, "mass must be positive");
      continue;
    }
    bool known = false;
    for (std::size_t j = 0; j < kParamsPerBody; ++j) {
      known = known || name.text == param_name(static_cast<Param>(j));
    }
    if (!known) {
      r.fail(name.column, "unknown parameter '" + std::string(name.text) +
                              "', expected eps, rho, x0, y0, z0 or mass");
    }
    if (block.contains(name.text)) {
      r.fail(name.column, "duplicate '" + std::string(name.text) +
                              "' (separate body blocks with a blank line)");
    }
    r.expect_fields(*t, 3, 3, "name pmin pmax");
    const double lo = r.number((*t)[1]);
    const double hi = r.number((*t)[2]);
    if (!(lo < hi)) r.fail((*t)[2].column, "pmax must exceed pmin");
    block.emplace(std::string(name.text), std::make_pair(lo, hi));
  }
  close_block();
  if (bodies.empty()) throw ParseError(source, r.line(), 1, "no body blocks");

  Constraints out;
  out.box = ParameterBox::from_bodies(bodies);
  const bool all_masses =
      std::all_of(masses.begin(), masses.end(), [](const auto& m) { return m.has_value(); });
  const bool no_masses =
      std::none_of(masses.begin(), masses.end(), [](const auto& m) { return m.has_value(); });
  if (!all_masses && !no_masses) {
    throw ParseError(source, r.line(), 1, "either every body block or none has a 'mass' line");
  }
  if (all_masses) {
    for (const auto& m : masses) out.masses.push_back(*m);
  }
  return out;
}

void write_constraints(std::ostream& out, const ParameterBox& box, std::span<const double> masses) {
  if (!masses.empty() && masses.size() != box.bodies()) {
    throw ValidationError("write_constraints: one mass per body expected");
  }
  out << "# name pmin pmax, one block per body\n";
  for (std::size_t k = 0; k < box.bodies(); ++k) {
    if (k > 0) out << '\n';
    for (std::size_t r = 0; r < kParamsPerBody; ++r) {
      const std::size_t j = k * kParamsPerBody + r;
      out << param_name(static_cast<Param>(r)) << ' ' << format_number(box.p_min[j]) << ' '
          << format_number(box.p_max[j]) << '\n';
    }
    if (!masses.empty()) out << "mass " << format_number(masses[k]) << '\n';
  }
}

FieldGrid read_grid(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::optional<std::vector<Token>> header;
  while ((header = r.next(true)) && header->empty()) {
  }
  if (!header || header->size() < 2 || (*header)[0].text != "#" || (*header)[1].text != "grid") {
    r.fail(1, "expected header '# grid xmin xmax ymin ymax nx ny'");
  }
  r.expect_fields(*header, 8, 8, "'# grid xmin xmax ymin ymax nx ny'");
  FieldGrid g;
  g.x_min = r.number((*header)[2]);
  g.x_max = r.number((*header)[3]);
  g.y_min = r.number((*header)[4]);
  g.y_max = r.number((*header)[5]);
  g.nx = r.count((*header)[6]);
  g.ny = r.count((*header)[7]);
  if (g.nx < 2 || g.ny < 2 || !(g.x_min < g.x_max) || !(g.y_min < g.y_max)) {
    r.fail(1, "grid header needs xmin < xmax, ymin < ymax and nx, ny >= 2");
  }
  g.values.reserve(g.nx * g.ny);
  const double tol_x = 1e-9 * std::max(1.0, std::abs(g.x_max) + std::abs(g.x_min));
  const double tol_y = 1e-9 * std::max(1.0, std::abs(g.y_max) + std::abs(g.y_min));
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      auto t = r.next_content();
      if (!t) r.fail_eof("grid ends after " + std::to_string(g.values.size()) + " of " +
                         std::to_string(g.nx * g.ny) + " rows");
      r.expect_fields(*t, 3, 3, "x y vz");
      const double x = r.number((*t)[0]);
      const double y = r.number((*t)[1]);
      if (std::abs(x - g.x(i)) > tol_x) r.fail((*t)[0].column, "x off the grid lattice");
      if (std::abs(y - g.y(j)) > tol_y) r.fail((*t)[1].column, "y off the grid lattice");
      g.values.push_back(r.number((*t)[2]));
    }
  }
  if (auto extra = r.next_content()) r.fail(extra->front().column, "rows beyond nx * ny");
  return g;
}

void write_grid(std::ostream& out, const FieldGrid& grid) {
  grid.validate();
  out << "# grid " << format_number(grid.x_min) << ' ' << format_number(grid.x_max) << ' '
      << format_number(grid.y_min) << ' ' << format_number(grid.y_max) << ' ' << grid.nx << ' '
      << grid.ny << '\n';
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < grid.nx; ++i) row(out, grid.x(i), grid.y(j), grid.at(i, j));
  }
}

std::vector<ExactParams> read_exact(std::istream& in, const std::string& source) {
  LineReader r(in, source);
  std::vector<ExactParams> out;
  while (auto t = r.next_content()) {
    r.expect_fields(*t, 8, 8, "a eps rho x0 y0 z0 volume mass");
    ExactParams e;
    double* fields[] = {&e.a, &e.eps, &e.rho, &e.x0, &e.y0, &e.z0, &e.volume, &e.mass};
    for (std::size_t k = 0; k < 8; ++k) *fields[k] = r.number((*t)[k]);
    r.check(e.spheroid());
    out.push_back(e);
  }
  return out;
}

void write_exact(std::ostream& out, std::span<const ExactParams> rows) {
  out << "# a eps rho x0 y0 z0 volume mass\n";
  for (const auto& e : rows) row(out, e.a, e.eps, e.rho, e.x0, e.y0, e.z0, e.volume, e.mass);
}

void write_peaks(std::ostream& out, std::span<const PeakCandidate> peaks) {
  out << "# peak x0 y0 vz_peak accepted valley on_boundary\n";
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const auto& p = peaks[k];
    out << k + 1 << ' ' << format_number(p.x0) << ' ' << format_number(p.y0) << ' '
        << format_number(p.vz_peak) << ' ' << (p.accepted ? 1 : 0) << ' '
        << (p.valley_to_nearest ? format_number(*p.valley_to_nearest) : std::string("-")) << ' '
        << (p.on_boundary ? 1 : 0) << '\n';
  }
}

void write_estimates(std::ostream& out, std::span<const PeakCandidate> peaks,
                     std::span<const DepthMassEstimate> estimates) {
  if (peaks.size() != estimates.size()) {
    throw ValidationError("write_estimates: one estimate per peak expected");
  }
  out << "# body x0 y0 z0 mass n_pairs spread z0_min z0_max n_rejected\n";
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const auto& e = estimates[k];
    out << k + 1 << ' ' << format_number(peaks[k].x0) << ' ' << format_number(peaks[k].y0) << ' '
        << format_number(e.z0) << ' ' << format_number(e.mass) << ' ' << e.n_pairs << ' '
        << format_number(e.spread) << ' ' << format_number(e.z0_min) << ' '
        << format_number(e.z0_max) << ' ' << e.n_rejected << '\n';
  }
}

void write_inversion(std::ostream& out, const InversionResult& result) {
  out << "functional " << functional_name(result.functional) << '\n';
  out << "alpha " << format_number(result.alpha) << '\n';
  out << "rounds " << result.rounds << '\n';
  out << "f_initial " << format_number(result.f_initial) << '\n';
  out << "f_final " << format_number(result.f_final) << '\n';
  out << "misfit " << format_number(result.misfit) << '\n';
  out << "bodies " << result.bodies.size() << '\n';
  out << "# body a eps rho x0 y0 z0 volume mass\n";
  for (std::size_t k = 0; k < result.bodies.size(); ++k) {
    const auto& s = result.bodies[k];
    out << k + 1 << ' ';
    row(out, s.a, s.eps, s.rho, s.x0, s.y0, s.z0, result.volumes[k], result.masses[k]);
  }
  out << "# final box: body name pmin pmax\n";
  for (std::size_t j = 0; j < result.box.size(); ++j) {
    out << j / kParamsPerBody + 1 << ' ' << result.box.names[j] << ' '
        << format_number(result.box.p_min[j]) << ' ' << format_number(result.box.p_max[j]) << '\n';
  }
}

void write_pipeline(std::ostream& out, const PipelineResult& result) {
  out << "poles " << result.peaks.size() << '\n';
  write_peaks(out, result.peaks);
  out << "accepted " << result.accepted.size() << '\n';
  write_estimates(out, result.accepted, result.estimates);
  out << "# initial box: body name pmin pmax\n";
  for (std::size_t j = 0; j < result.initial_box.size(); ++j) {
    out << j / kParamsPerBody + 1 << ' ' << result.initial_box.names[j] << ' '
        << format_number(result.initial_box.p_min[j]) << ' '
        << format_number(result.initial_box.p_max[j]) << '\n';
  }
  if (!result.inversion.bodies.empty()) write_inversion(out, result.inversion);
  for (const auto& d : result.diagnostics) out << "# note: " << d << '\n';
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open file for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(path.string() + ": cannot open file for writing");
  return out;
}

}  // namespace gravinv
