#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mfchaos/model.hpp"

namespace mfchaos {

/// Tabulated coupling geometry: the concave distance f and its building
/// blocks phi, Phi, g on a shared grid, with the scalars R0, R1, c.
///
/// Grid tables are interpolated piecewise linearly. Beyond R1 every quantity
/// has a closed form (phi, g constant; f affine), which is used directly, so
/// f can be evaluated at any r >= 0.
struct RateProfile {
  double R0 = 0.0;
  double R1 = 0.0;
  double c = 0.0;
  double eta = 0.0;
  double decay_rate = 0.0;  // 2 (c - eta)
  double phi_R0 = 1.0;
  double quadrature_tol = 0.0;
  std::size_t R0_index = 0;
  std::size_t R1_index = 0;

  std::vector<double> grid;
  std::vector<double> curvature_integral;  // int_0^r s kappa_-(s) ds
  std::vector<double> phi_tab;
  std::vector<double> Phi_tab;
  std::vector<double> Psi_tab;  // int_0^r Phi / phi
  std::vector<double> g_tab;
  std::vector<double> f_tab;

  double f(double r) const;
  double phi(double r) const;
  double Phi(double r) const;
  double g(double r) const;
  /// Converts a W_f value into the W_1 bound 2 phi(R0)^{-1} value.
  double w1_from_wf(double wf) const { return 2.0 * wf / phi_R0; }
};

struct ProfileOptions {
  /// Upper end of the grid; defaults to max(2 R1, 10 R0 + 10).
  std::optional<double> r_max;
  std::size_t cells = 10000;
  double quadrature_tol = 1e-10;
};

/// inf{s >= 0 : kappa(r) >= 0 for all r >= s}.
double compute_R0(const PotentialModel& model);

/// inf{s >= R0 : s (s - R0) inf_{r >= s} kappa(r) >= 8}.
double compute_R1(const PotentialModel& model, double R0);

/// phi(R0) = exp(-1/4 int_0^R0 s kappa_-(s) ds), without building the full table.
double phi_at_R0(const PotentialModel& model, double R0, double tol = 1e-12);

/// Smallest eta certified by the Lipschitz sufficient condition:
/// |grad W(x) - grad W(y)| <= L r <= (2 L / phi(R0)) f(r).
double conservative_eta(const PotentialModel& model);

/// Builds the profile without an interaction level (eta = 0).
RateProfile tabulate_geometry(const PotentialModel& model, const ProfileOptions& options = {});

/// Sets eta and the decay rate 2 (c - eta). Throws HypothesisError if eta >= c.
RateProfile admit_eta(RateProfile profile, double eta);

/// tabulate_geometry followed by admit_eta.
RateProfile tabulate_profile(const PotentialModel& model, double eta,
                             const ProfileOptions& options = {});

struct InequalityFailure {
  double r = 0.0;
  double lhs = 0.0;  // f'' - r kappa f' / 4
  double rhs = 0.0;  // -c f / 2
};

struct InequalityReport {
  std::size_t midpoints_checked = 0;
  std::size_t midpoints_excluded = 0;
  double max_violation = 0.0;  // max(lhs - rhs); <= 0 means the inequality holds
  double tolerance = 1e-8;
  std::vector<InequalityFailure> failures;
  bool passed() const { return failures.empty(); }
};

/// Checks f'' - r kappa f'/4 <= -c f / 2 at every grid midpoint outside one
/// cell around R1, with f', f'' from f' = phi g and f'' = phi' g + phi g'.
InequalityReport verify_f_inequality(const RateProfile& profile, const PotentialModel& model,
                                     double tolerance = 1e-8);

/// omega(delta) = sup_{s in [0, delta]} s kappa(s)^-.
double omega(const PotentialModel& model, double delta);

/// The constant multiplying eta N^{-1/2}: (1 + sqrt 2) sqrt(C_moment), which
/// dominates (1/sqrt(N-1) + sqrt(2)/N) sqrt(C_moment) sqrt(N) for N >= 2.
double theorem_constant(double C_moment);

/// e^{-2(c-eta) t} W_f(0) + (2(c-eta))^{-1} C eta N^{-1/2}.
double theorem_bound(const RateProfile& profile, double W_f_initial, double C_moment,
                     std::size_t N, double t);

/// (omega(delta) + 2 c f(delta)) / (2 (c - eta)): the extra term of the bound
/// before the delta -> 0 limit.
double discretization_allowance(const RateProfile& profile, const PotentialModel& model,
                                double delta);

}  // namespace mfchaos
