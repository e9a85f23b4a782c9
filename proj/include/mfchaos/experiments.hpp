#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfchaos/config.hpp"
#include "mfchaos/model.hpp"
#include "mfchaos/rates.hpp"
#include "mfchaos/simulate.hpp"

namespace mfchaos {

/// Model, eta = 0 geometry and the chosen interaction level for a config.
/// `admissible` is false when eta >= c; commands that need Theorem-level
/// guarantees refuse to run in that case.
struct ExperimentSetup {
  ExperimentConfig config;
  PotentialModel model;
  RateProfile geometry;
  double eta = 0.0;
  bool eta_from_config = false;
  bool admissible = false;
  double delta = 0.0;
};

PotentialModel build_model(const ExperimentConfig& config);
ExperimentSetup prepare(const ExperimentConfig& config);
/// The profile with eta admitted; throws HypothesisError when eta >= c.
RateProfile admitted_profile(const ExperimentSetup& setup);

struct RunOptions {
  unsigned threads = 1;
  /// Directory for results.csv / summary.json / rate_profile.json; nothing is
  /// written when empty.
  std::string out_dir;
};

/// One line of results.csv.
struct ResultRow {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  std::size_t N = 0;
  std::size_t M = 0;  // 0 when the exact closure replaces the reference ensemble
  std::size_t replication = 0;
  double t = 0.0;
  double mean_f_distance = 0.0;
  double mean_euclid_distance = 0.0;
  double w1_converted = 0.0;
  double bound_theorem = 0.0;
  double second_moment_particles = 0.0;
  double second_moment_nonlinear = 0.0;
  double upsilon_estimate = 0.0;
  bool within_bound = true;
};

inline constexpr const char* kResultsHeader =
    "run_id,seed,N,M,replication,t,mean_f_distance,mean_euclid_distance,w1_converted,"
    "bound_theorem,second_moment_particles,second_moment_nonlinear,upsilon_estimate,"
    "within_bound";

std::string format_results_csv(const std::vector<ResultRow>& rows);

/// Replication mean and standard error of one statistic at one output time.
struct TimeStat {
  double t = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
};

/// All replications for one particle number.
struct NBlock {
  std::size_t N = 0;
  std::size_t M = 0;
  std::vector<std::vector<SummaryRecord>> runs;  // [replication][output time]
  std::vector<TimeStat> f_distance;              // per output time
  std::vector<TimeStat> second_moment_nonlinear;
  double W0 = 0.0;  // replication mean of the t = 0 f-distance
};

struct ExperimentResult {
  std::string command;
  std::vector<NBlock> blocks;
  std::vector<ResultRow> rows;  // sorted by N, replication, t
  nlohmann::json summary;
  std::string text;
  bool passed = true;
};

/// Mean of the f-distance over output times in [t_lo, t_hi].
double window_average(const std::vector<SummaryRecord>& run, double t_lo, double t_hi);

/// Slope of the least-squares line through (x_k, y_k).
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

struct RatesOutcome {
  RateProfile profile;  // eta set, decay_rate possibly <= 0 when inadmissible
  nlohmann::json json;
  std::string text;
  bool admissible = false;
};

/// Writes rate_profile.json and returns the human-readable summary.
/// Throws HypothesisError (after writing) when eta >= c.
RatesOutcome cmd_rates(const ExperimentConfig& config, const RunOptions& options);

struct ValidateOutcome {
  ValidationReport report;
  InequalityReport inequality;
  std::vector<CheckResult> extra_checks;  // mixing identities, profile invariants
  nlohmann::json json;
  std::string text;
  int exit_code = 0;  // 0 pass, 2 hypothesis failure, 3 non-finite values
};

ValidateOutcome cmd_validate(const ExperimentConfig& config, const RunOptions& options);

/// Plateau f-distance against N, log-log slope with bootstrap interval.
ExperimentResult cmd_poc_scaling(const ExperimentConfig& config, const RunOptions& options);

/// f-distance against t with the exponential envelope of the bound.
ExperimentResult cmd_contraction(const ExperimentConfig& config, const RunOptions& options);

/// Sup over time of the nonlinear second moment against the Gronwall bound.
ExperimentResult cmd_moments(const ExperimentConfig& config, const RunOptions& options);

}  // namespace mfchaos
