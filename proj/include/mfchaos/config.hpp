#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfchaos/simulate.hpp"

namespace mfchaos {

inline constexpr int kSchemaVersion = 1;

/// Experiment description read from a flat `key = value` text file.
/// Lines starting with '#' and blank lines are ignored; unknown keys are
/// rejected so typos do not silently fall back to defaults.
///
/// eta, delta and M accept `auto`:
///   eta   -> 2 L / phi(R0) from the Lipschitz constant of grad W
///   delta -> 10 sqrt(h)
///   M     -> max(4096, 16 N)
struct ExperimentConfig {
  int schema_version = kSchemaVersion;

  std::string model = "quadratic";  // quadratic | double_well
  std::size_t dim = 1;
  double rho = 1.0;     // quadratic
  double a = 1.0;       // double_well
  double lambda = 0.0;  // both
  int sign = 1;         // double_well

  std::optional<double> eta;
  double h = 0.01;
  double t_end = 1.0;
  double output_dt = 0.1;
  std::optional<double> delta;
  std::optional<std::size_t> M;
  bool closure = true;

  std::vector<std::size_t> n_list{16, 64, 256, 1024};
  std::size_t replications = 8;
  std::uint64_t seed = 1;

  InitialLaw nu{LawKind::kPoint, {0.0}, 0.0};
  InitialLaw mu{LawKind::kPoint, {0.0}, 0.0};
  InitialCoupling coupling = InitialCoupling::kSynchronous;

  std::size_t grid_cells = 10000;
  double quadrature_tol = 1e-10;
  std::size_t validation_samples = 100000;
  std::string output_dir = "out";

  /// Output times 0, output_dt, ..., t_end (t_end always included).
  std::vector<double> output_times() const;
  std::size_t resolved_M(std::size_t N) const;
  double resolved_delta() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError with the offending line number.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config_string(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Structural checks that do not need the rate profile.
void check_config(const ExperimentConfig& config);

}  // namespace mfchaos
