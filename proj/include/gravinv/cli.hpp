#pragma once

// The gravinv command-line tool. Every subcommand prints a `[summary]`
// block of `key = value` lines on stdout; `--report` adds a readable table.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gravinv {

/// Seed used by `noise` when --seed is omitted. `scenario` defaults to the
/// seed embedded in the scenario.
inline constexpr std::uint64_t kDefaultSeed = 20140901;

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitParse = 2,
  kExitValidation = 3,
  kExitNumerical = 4,
};

struct RunConfig {
  std::string subcommand;

  // Inputs.
  std::string model;
  std::string stations;
  std::string survey;
  std::string constraints;
  std::string name;  // scenario

  // Outputs.
  std::string out;
  std::string out_dir;
  std::string grid_out;
  std::string model_out;
  bool report = false;

  // Rasters.
  std::size_t nx = 61;
  std::size_t ny = 61;
  std::vector<double> domain{0.0, 15.0, 0.0, 15.0};
  std::string gridding = "spline";
  double smoothing = 1.0;
  double power = 2.0;

  // Detection.
  double min_separation = 2.0;
  double valley = 0.20;
  double noise_threshold = 0.20;
  double noise_level = 0.05;
  bool resolve_merged = true;

  // Inversion.
  double alpha = 1e-8;
  std::string functional = "f1";
  std::string mass_update = "peak";
  double tol = 1e-6;
  std::size_t sweeps = 200;
  std::size_t rounds = 10;
  double shrink = 0.7;

  // Noise.
  double sigma = 0.0;
  double relative = 0.0;
  std::optional<std::uint64_t> seed;

  /// Throws ValidationError for any setting outside its documented range.
  void validate() const;
};

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gravinv
