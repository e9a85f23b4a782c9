#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mfchaos/cloud.hpp"
#include "mfchaos/model.hpp"
#include "mfchaos/philox.hpp"
#include "mfchaos/rates.hpp"

namespace mfchaos {

/// Weights switching between reflection (|x| >= delta) and synchronous
/// (|x| <= delta/2) coupling, with phi_r^2 + phi_s^2 = 1.
struct MixingFunctions {
  double delta = 1.0;

  double reflection_weight(double norm) const;
  double synchronous_weight(double norm) const;
  double phi_r(std::span<const double> x) const { return reflection_weight(norm(x)); }
  double phi_s(std::span<const double> x) const { return synchronous_weight(norm(x)); }
};

MixingFunctions make_mixing(double delta);

/// Default mixing width for step size h: 10 sqrt(h).
double default_delta(double h);

enum class LawKind { kPoint, kGaussian, kUniformBall };

/// Initial law with finite fourth moment: point mass at `mean`, isotropic
/// Gaussian with standard deviation `scale`, or uniform ball of radius `scale`.
struct InitialLaw {
  LawKind kind = LawKind::kPoint;
  std::vector<double> mean;
  double scale = 0.0;

  double coordinate_variance() const;
  double second_moment() const;
  friend bool operator==(const InitialLaw&, const InitialLaw&) = default;
};

enum class InitialCoupling { kSynchronous, kIndependent };

struct SimConfig {
  std::size_t N = 2;
  std::size_t M = 4096;
  std::size_t dim = 1;
  double h = 0.01;
  double t_end = 1.0;
  double delta = 1.0;
  std::uint64_t seed = 1;
  InitialLaw nu;  // nonlinear copies
  InitialLaw mu;  // particle system
  InitialCoupling coupling = InitialCoupling::kSynchronous;
  /// Times at which summaries are emitted; each must be a multiple of h.
  std::vector<double> output_times;
  /// Use the exact mean/variance closure when the model admits one.
  bool allow_closure = true;

  void validate() const;
  std::size_t steps() const;
};

/// Mean and per-coordinate variance of the nonlinear law for quadratic V
/// and W, evolved exactly.
struct LinearClosure {
  std::vector<double> mean;
  double variance = 0.0;
  double confinement = 0.0;
  double interaction = 0.0;

  void advance(double dt);
};

struct CoupledEnsemble {
  double t = 0.0;
  std::uint64_t step = 0;
  double h = 0.0;
  Cloud X_bar;  // nonlinear copies
  Cloud X;      // particle system
  Cloud E;      // X_bar - X
  std::optional<Cloud> reference;
  std::optional<LinearClosure> closure;

  std::size_t size() const { return X.size(); }
  std::size_t dim() const { return X.dim(); }
};

struct SummaryRecord {
  double t = 0.0;
  double mean_f_distance = 0.0;
  double mean_euclid_distance = 0.0;
  double second_moment_particles = 0.0;
  double second_moment_nonlinear = 0.0;
  double upsilon_estimate = 0.0;
};

/// Interaction drift (1/N) sum_j grad W(x - y_j) against an ensemble; uses
/// the mean closure k (x - mean) when W is quadratic.
void interaction_drift(const PotentialModel& model, const Cloud& ensemble,
                       std::span<const double> ensemble_mean, std::span<const double> x,
                       std::span<double> out);

/// One Euler-Maruyama step of the mean-field particle system, in place.
/// Throws NumericalError on non-finite output.
void step_particles(Cloud& state, const PotentialModel& model, double h, const Cloud& noise);

/// Reference ensemble step: the same self-interacting dynamics with M particles.
void advance_reference(Cloud& reference, const PotentialModel& model, double h,
                       const Cloud& noise);

/// Noise increments (before the sqrt(2h) factor) for one coupled pair:
/// nonlinear copy gets phi_r G + phi_s G~, particle gets phi_r (I - 2ee^T) G + phi_s G~.
void coupled_noise(const MixingFunctions& mix, std::span<const double> E,
                   std::span<const double> G, std::span<const double> G_sync,
                   std::span<double> noise_nonlinear, std::span<double> noise_particle);

/// Draws the initial coupled state from (nu, mu) under the configured coupling.
CoupledEnsemble initialize_ensemble(const SimConfig& config, const PotentialModel& model,
                                    const NoiseSource& noise);

/// One Euler-Maruyama step of the full reflection/synchronous coupling.
void step_coupled(CoupledEnsemble& ens, const PotentialModel& model, const MixingFunctions& mix,
                  const NoiseSource& noise);

/// Summary statistics of the current coupled state.
SummaryRecord summarize(const CoupledEnsemble& ens, const PotentialModel& model,
                        const RateProfile& profile);

/// Runs replication `replication` of the coupling to t_end, emitting a
/// summary at every configured output time.
std::vector<SummaryRecord> run_coupled(const SimConfig& config, const PotentialModel& model,
                                       const RateProfile& profile, std::uint64_t replication);

}  // namespace mfchaos
