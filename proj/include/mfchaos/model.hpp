#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfchaos {

/// Writes a vector field value at x into out (both of length dim).
using VectorField = std::function<void(std::span<const double> x, std::span<double> out)>;
using ScalarProfile = std::function<double(double)>;

/// User-asserted tail certificate: kappa(r) >= floor for every r >= radius.
struct KappaTail {
  double floor = 0.0;
  double radius = 0.0;
};

/// Everything needed to construct a PotentialModel. m_V and M_V are derived
/// from kappa when left empty.
struct ModelParts {
  std::string name;
  std::size_t dim = 1;
  VectorField grad_V;
  VectorField grad_W;
  ScalarProfile kappa;
  KappaTail tail;
  /// kappa is nondecreasing on [r, inf); lets the tail infimum in R1 be
  /// evaluated exactly instead of bounded by tail.floor.
  std::optional<double> kappa_monotone_from;
  /// Largest |kappa(r + 1e-3) - kappa(r)| tolerated by the continuity check.
  double kappa_jump_bound = 0.05;
  double lip_W = 0.0;
  std::optional<double> m_V;
  std::optional<double> M_V;
  std::optional<double> M_W;
  /// grad V(x) = confinement_coefficient * x, when V is quadratic.
  std::optional<double> confinement_coefficient;
  /// grad W(x) = interaction_coefficient * x, when W is quadratic.
  std::optional<double> interaction_coefficient;
};

/// Confinement/interaction pair with its curvature profile. Immutable once
/// built, so it can be shared freely between worker threads.
class PotentialModel {
 public:
  explicit PotentialModel(ModelParts parts);

  const std::string& name() const { return parts_.name; }
  std::size_t dim() const { return parts_.dim; }

  void grad_V(std::span<const double> x, std::span<double> out) const { parts_.grad_V(x, out); }
  void grad_W(std::span<const double> x, std::span<double> out) const { parts_.grad_W(x, out); }
  double kappa(double r) const { return parts_.kappa(r); }
  double kappa_negative_part(double r) const {
    const double k = parts_.kappa(r);
    return k < 0.0 ? -k : 0.0;
  }

  const KappaTail& tail() const { return parts_.tail; }
  std::optional<double> kappa_monotone_from() const { return parts_.kappa_monotone_from; }
  double kappa_jump_bound() const { return parts_.kappa_jump_bound; }
  double lip_W() const { return parts_.lip_W; }
  double m_V() const { return *parts_.m_V; }
  double M_V() const { return *parts_.M_V; }
  std::optional<double> M_W() const { return parts_.M_W; }
  std::optional<double> confinement_coefficient() const { return parts_.confinement_coefficient; }
  std::optional<double> interaction_coefficient() const { return parts_.interaction_coefficient; }
  /// |grad V(0)|, which enters the moment bound.
  double grad_V_origin_norm() const { return grad_V0_norm_; }

  /// True when both V and W are quadratic, so the nonlinear law has an exact
  /// mean/variance closure.
  bool has_linear_closure() const {
    return parts_.confinement_coefficient.has_value() &&
           parts_.interaction_coefficient.has_value();
  }

 private:
  ModelParts parts_;
  double grad_V0_norm_ = 0.0;
};

/// V(x) = |x|^4 - a|x|^2, W(x) = sign * lambda * |x|^2.
PotentialModel builtin_double_well(double a, double lambda, int sign, std::size_t dim = 1);

/// V(x) = rho|x|^2/2, W(x) = lambda|x|^2. Analytic Ornstein-Uhlenbeck reference.
PotentialModel builtin_quadratic(double rho, double lambda, std::size_t dim = 1);

struct CheckResult {
  std::string name;
  bool passed = true;
  /// Worst observed slack (negative means violated) or worst deviation.
  double worst = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  double eta = 0.0;
  double c = 0.0;
  bool eta_below_c = false;
  bool eta_below_half_m_V = false;
  /// M_W supplied, or eta < m_V / 2.
  bool moment_hypothesis = false;

  bool assumptions_passed() const;
  bool all_passed() const { return assumptions_passed() && eta_below_c && moment_hypothesis; }
  const CheckResult* find(const std::string& name) const;
};

/// Random-sampling check of the curvature, interaction and symmetry
/// hypotheses for a given eta and concave distance f with contraction rate c.
ValidationReport validate_assumptions(const PotentialModel& model, double eta,
                                      const ScalarProfile& f, double c, std::size_t samples,
                                      std::uint64_t seed = 0x5eed);

/// Uniform bound on E|X_t|^2 for the nonlinear process, from the fixed point
/// of the Gronwall inequality. Throws HypothesisError when neither M_W is
/// available nor eta < m_V / 2.
double gronwall_moment_bound(const PotentialModel& model, double eta, double second_moment_0);

}  // namespace mfchaos
