#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geowave/errors.hpp"
#include "geowave/solver.hpp"

namespace geowave::cli {

/// Parsed `key = value` file. Values are kept as text and typed on access;
/// every key must appear in the schema (ConfigInvalid otherwise).
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::vector<double>> get_pairs(const std::string& key) const;

  /// Every schema key with its effective value, sorted, one `key = value` per line.
  std::string canonical() const;

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

/// Schema keys with their defaults.
const std::map<std::string, std::string>& config_schema();

uint64_t fnv1a(const std::string& bytes);

/// Typed view of a Config.
struct Experiment {
  std::string manifold;
  double domain_radius = 6.0;
  int points = 1536;
  double horizon = 1.0;
  double cone_radius = 2.0;
  noise::SpectralMeasure measure;
  uint64_t seed = 1;
  solver::SolverOptions solver;
  double amplitude = 0.5;
  double speed = 0.0;
  double control_amplitude = 0.0;
  int control_blocks = 4;
  int control_mode = 0;
  const Config* config = nullptr;

  static Experiment from(const Config& config);
  GridFunction lattice() const;
  /// Bump data on the target: theta = amplitude exp(-x^2) and rotation speed.
  State initial_state() const;
  /// Constant-in-time control of the configured amplitude on one mode, or
  /// none when the amplitude is zero.
  bool has_control() const { return control_amplitude != 0.0; }
  solver::Control control(int dim) const;
};

/// `geowave <command> --config <file> --out <dir> [--seed N] [--threads K]`.
/// Returns the process exit code: 0 success, 1 a failed check, 2 usage,
/// 10 + ErrorCode for library errors.
int run_command(int argc, const char* const* argv);

int exit_code(ErrorCode code);

}  // namespace geowave::cli
