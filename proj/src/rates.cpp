#include "mfchaos/rates.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfchaos/errors.hpp"
#include "mfchaos/numerics.hpp"

namespace mfchaos {

namespace {

constexpr double kRootTol = 1e-9;
constexpr double kR1SearchCap = 1e6;

double interpolate(const std::vector<double>& grid, const std::vector<double>& tab, double r) {
  if (r <= grid.front()) return tab.front();
  if (r >= grid.back()) return tab.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), r);
  const auto k = static_cast<std::size_t>(it - grid.begin()) - 1;
  const double w = (r - grid[k]) / (grid[k + 1] - grid[k]);
  return tab[k] + w * (tab[k + 1] - tab[k]);
}

// Infimum of kappa over [s, inf).
double tail_infimum(const PotentialModel& model, double s) {
  constexpr int kGrid = 2000;
  if (auto from = model.kappa_monotone_from()) {
    const double stop = std::max(s, *from);
    double inf = model.kappa(stop);
    if (stop > s) {
      for (int k = 0; k < kGrid; ++k) inf = std::min(inf, model.kappa(s + (stop - s) * k / kGrid));
    }
    return inf;
  }
  // Without monotonicity the certified floor bounds everything past r_cap.
  const double r_cap = std::max({2.0 * model.tail().radius, 2.0 * s, s + 1.0});
  double inf = model.tail().floor;
  for (int k = 0; k <= kGrid; ++k) inf = std::min(inf, model.kappa(s + (r_cap - s) * k / kGrid));
  return inf;
}

// Exact (to quadrature tolerance) values of the profile quantities inside a
// grid cell, integrating from the tabulated value at the cell's left end.
class ProfileIntegrator {
 public:
  ProfileIntegrator(const PotentialModel& model, const RateProfile& p, double cell_tol)
      : model_(model), p_(p), tol_(cell_tol) {}

  std::size_t cell_of(double s) const {
    const auto it = std::upper_bound(p_.grid.begin(), p_.grid.end(), s);
    const auto k = static_cast<std::size_t>(it - p_.grid.begin());
    return k == 0 ? 0 : std::min(k - 1, p_.grid.size() - 2);
  }

  double I_at(double s, std::size_t k) const {
    if (s >= p_.R0) return p_.curvature_integral[p_.R0_index];
    auto integrand = [this](double u) { return u * model_.kappa_negative_part(u); };
    return p_.curvature_integral[k] + numerics::adaptive_simpson(integrand, p_.grid[k], s, tol_);
  }

  double phi_at(double s, std::size_t k) const {
    if (s >= p_.R0) return p_.phi_R0;
    return std::exp(-I_at(s, k) / 4.0);
  }

  double Phi_at(double s, std::size_t k) const {
    if (s >= p_.R0) return p_.Phi_tab[p_.R0_index] + p_.phi_R0 * (s - p_.R0);
    auto integrand = [this, k](double u) { return phi_at(u, k); };
    return p_.Phi_tab[k] + numerics::adaptive_simpson(integrand, p_.grid[k], s, tol_);
  }

  double Psi_at(double s, std::size_t k) const {
    if (s >= p_.R0) {
      const double dr = s - p_.R0;
      const double PhiR0 = p_.Phi_tab[p_.R0_index];
      return p_.Psi_tab[p_.R0_index] + (PhiR0 * dr + 0.5 * p_.phi_R0 * dr * dr) / p_.phi_R0;
    }
    auto integrand = [this, k](double u) { return Phi_at(u, k) / phi_at(u, k); };
    return p_.Psi_tab[k] + numerics::adaptive_simpson(integrand, p_.grid[k], s, tol_);
  }

  double g_at(double s, std::size_t k) const {
    if (s >= p_.R1) return 0.5;
    return 1.0 - 0.5 * p_.c * Psi_at(s, k);
  }

  double f_at(double s, std::size_t k) const {
    if (s >= p_.R1) return p_.f_tab[p_.R1_index] + 0.5 * p_.phi_R0 * (s - p_.R1);
    auto integrand = [this, k](double u) { return phi_at(u, k) * g_at(u, k); };
    return p_.f_tab[k] + numerics::adaptive_simpson(integrand, p_.grid[k], s, tol_);
  }

 private:
  const PotentialModel& model_;
  const RateProfile& p_;
  double tol_;
};

void require_finite(double v, const char* what, double r) {
  if (!std::isfinite(v)) throw NumericalError(fmt::format("non-finite {} at r={:.6g}", what, r));
}

}  // namespace

double RateProfile::phi(double r) const {
  if (r >= R0) return phi_R0;
  return interpolate(grid, phi_tab, r);
}

double RateProfile::Phi(double r) const {
  if (r >= R0) return Phi_tab[R0_index] + phi_R0 * (r - R0);
  return interpolate(grid, Phi_tab, std::max(r, 0.0));
}

double RateProfile::g(double r) const {
  if (r >= R1) return 0.5;
  return interpolate(grid, g_tab, std::max(r, 0.0));
}

double RateProfile::f(double r) const {
  if (r <= 0.0) return 0.0;
  if (r >= R1) return f_tab[R1_index] + 0.5 * phi_R0 * (r - R1);
  return interpolate(grid, f_tab, r);
}

double compute_R0(const PotentialModel& model) {
  const auto& tail = model.tail();
  // Past the certified radius kappa must stay nonnegative.
  const double check_hi = 4.0 * tail.radius + 10.0;
  constexpr int kCheck = 4000;
  for (int k = 0; k <= kCheck; ++k) {
    const double r = tail.radius + (check_hi - tail.radius) * k / kCheck;
    const double v = model.kappa(r);
    if (!std::isfinite(v)) throw NumericalError(fmt::format("kappa not finite at r={:.6g}", r));
    if (v < 0.0) {
      throw HypothesisError(fmt::format(
          "kappa({:.6g}) = {:.6g} < 0 beyond the certified tail radius {:.6g}", r, v, tail.radius));
    }
  }
  if (tail.radius == 0.0) return 0.0;

  constexpr int kScan = 10000;
  int last_negative = -1;
  for (int k = 0; k <= kScan; ++k) {
    const double r = tail.radius * k / kScan;
    const double v = model.kappa(r);
    if (!std::isfinite(v)) throw NumericalError(fmt::format("kappa not finite at r={:.6g}", r));
    if (v < 0.0) last_negative = k;
  }
  if (last_negative < 0) return 0.0;
  if (last_negative == kScan) {
    throw HypothesisError("kappa negative at the certified tail radius");
  }
  const double lo = tail.radius * last_negative / kScan;
  const double hi = tail.radius * (last_negative + 1) / kScan;
  return numerics::bisect_predicate([&](double r) { return model.kappa(r) >= 0.0; }, lo, hi,
                                    kRootTol);
}

double compute_R1(const PotentialModel& model, double R0) {
  if (!(R0 >= 0.0)) throw std::invalid_argument("R0 must be nonnegative");
  auto holds = [&](double s) { return s * (s - R0) * tail_infimum(model, s) >= 8.0; };
  double lo = R0;
  double hi = R0 + 0.5;
  while (!holds(hi)) {
    lo = hi;
    hi = R0 + 2.0 * (hi - R0);
    if (hi > kR1SearchCap) {
      throw HypothesisError("no R1 <= 1e6 found: the kappa tail is too weak");
    }
  }
  return numerics::bisect_predicate(holds, lo, hi, kRootTol);
}

double phi_at_R0(const PotentialModel& model, double R0, double tol) {
  if (R0 <= 0.0) return 1.0;
  constexpr int kPanels = 1000;
  auto integrand = [&](double u) { return u * model.kappa_negative_part(u); };
  double I = 0.0;
  for (int k = 0; k < kPanels; ++k) {
    I += numerics::adaptive_simpson(integrand, R0 * k / kPanels, R0 * (k + 1) / kPanels,
                                    tol / kPanels);
  }
  return std::exp(-I / 4.0);
}

double conservative_eta(const PotentialModel& model) {
  if (model.lip_W() == 0.0) return 0.0;
  return 2.0 * model.lip_W() / phi_at_R0(model, compute_R0(model));
}

RateProfile tabulate_geometry(const PotentialModel& model, const ProfileOptions& options) {
  if (options.cells < 1000) throw std::invalid_argument("profile needs at least 1000 grid cells");
  if (!(options.quadrature_tol > 0.0)) throw std::invalid_argument("quadrature_tol must be > 0");

  RateProfile p;
  p.R0 = compute_R0(model);
  p.R1 = compute_R1(model, p.R0);
  p.quadrature_tol = options.quadrature_tol;
  const double r_max = options.r_max.value_or(std::max(2.0 * p.R1, 10.0 * p.R0 + 10.0));
  if (r_max < 2.0 * p.R1 * (1.0 - 1e-12)) {
    throw std::invalid_argument(fmt::format("r_max={:.6g} must be at least 2 R1={:.6g}", r_max,
                                            2.0 * p.R1));
  }

  // Segments [0,R0], [R0,R1], [R1,r_max] so both radii are exact grid points.
  const double step = r_max / static_cast<double>(options.cells);
  p.grid.push_back(0.0);
  auto add_segment = [&](double a, double b) {
    if (b <= a) return;
    const auto n = std::max<long>(1, std::lround((b - a) / step));
    for (long k = 1; k < n; ++k) p.grid.push_back(a + (b - a) * static_cast<double>(k) / n);
    p.grid.push_back(b);
  };
  add_segment(0.0, p.R0);
  p.R0_index = p.grid.size() - 1;
  add_segment(p.R0, p.R1);
  p.R1_index = p.grid.size() - 1;
  add_segment(p.R1, r_max);

  const std::size_t K = p.grid.size();
  const double cell_tol = options.quadrature_tol / static_cast<double>(K);
  p.curvature_integral.assign(K, 0.0);
  p.phi_tab.assign(K, 1.0);
  p.Phi_tab.assign(K, 0.0);
  p.Psi_tab.assign(K, 0.0);
  p.g_tab.assign(K, 1.0);
  p.f_tab.assign(K, 0.0);

  ProfileIntegrator in(model, p, cell_tol);

  // Each pass fills one table; later passes read only completed ones.
  for (std::size_t k = 0; k + 1 < K && k < p.R0_index; ++k) {
    bool ok = true;
    auto integrand = [&](double u) { return u * model.kappa_negative_part(u); };
    p.curvature_integral[k + 1] =
        p.curvature_integral[k] +
        numerics::adaptive_simpson(integrand, p.grid[k], p.grid[k + 1], cell_tol, 40, &ok);
    require_finite(p.curvature_integral[k + 1], "curvature integral", p.grid[k + 1]);
  }
  for (std::size_t k = p.R0_index + 1; k < K; ++k) {
    p.curvature_integral[k] = p.curvature_integral[p.R0_index];
  }
  p.phi_R0 = std::exp(-p.curvature_integral[p.R0_index] / 4.0);
  for (std::size_t k = 0; k < K; ++k) {
    p.phi_tab[k] = k >= p.R0_index ? p.phi_R0 : std::exp(-p.curvature_integral[k] / 4.0);
  }

  for (std::size_t k = 0; k + 1 < K; ++k) {
    if (k < p.R0_index) {
      p.Phi_tab[k + 1] = p.Phi_tab[k] + numerics::adaptive_simpson(
                                            [&](double u) { return in.phi_at(u, k); }, p.grid[k],
                                            p.grid[k + 1], cell_tol);
    } else {
      p.Phi_tab[k + 1] = p.Phi_tab[p.R0_index] + p.phi_R0 * (p.grid[k + 1] - p.R0);
    }
    require_finite(p.Phi_tab[k + 1], "Phi", p.grid[k + 1]);
  }

  for (std::size_t k = 0; k + 1 < K; ++k) {
    p.Psi_tab[k + 1] = k < p.R0_index
                           ? p.Psi_tab[k] + numerics::adaptive_simpson(
                                                [&](double u) {
                                                  return in.Phi_at(u, k) / in.phi_at(u, k);
                                                },
                                                p.grid[k], p.grid[k + 1], cell_tol)
                           : in.Psi_at(p.grid[k + 1], k);
    require_finite(p.Psi_tab[k + 1], "Phi/phi integral", p.grid[k + 1]);
  }

  const double norm = p.Psi_tab[p.R1_index];
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericalError("normalising integral of Phi/phi over [0, R1] is not positive");
  }
  p.c = 1.0 / norm;
  for (std::size_t k = 0; k < K; ++k) {
    p.g_tab[k] = k >= p.R1_index ? 0.5 : 1.0 - 0.5 * p.c * p.Psi_tab[k];
  }

  for (std::size_t k = 0; k + 1 < K && k < p.R1_index; ++k) {
    p.f_tab[k + 1] =
        p.f_tab[k] + numerics::adaptive_simpson(
                         [&](double u) { return in.phi_at(u, k) * in.g_at(u, k); }, p.grid[k],
                         p.grid[k + 1], cell_tol);
    require_finite(p.f_tab[k + 1], "f", p.grid[k + 1]);
  }
  for (std::size_t k = p.R1_index + 1; k < K; ++k) {
    p.f_tab[k] = p.f_tab[p.R1_index] + 0.5 * p.phi_R0 * (p.grid[k] - p.R1);
  }

  p.eta = 0.0;
  p.decay_rate = 2.0 * p.c;
  return p;
}

RateProfile admit_eta(RateProfile profile, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
  if (eta >= profile.c) {
    throw HypothesisError(fmt::format(
        "interaction hypothesis violated: eta={:.6g} is not below the contraction rate c={:.6g}",
        eta, profile.c));
  }
  profile.eta = eta;
  profile.decay_rate = 2.0 * (profile.c - eta);
  return profile;
}

RateProfile tabulate_profile(const PotentialModel& model, double eta,
                             const ProfileOptions& options) {
  return admit_eta(tabulate_geometry(model, options), eta);
}

InequalityReport verify_f_inequality(const RateProfile& p, const PotentialModel& model,
                                     double tolerance) {
  InequalityReport report;
  report.tolerance = tolerance;
  report.max_violation = -std::numeric_limits<double>::infinity();
  const double cell_tol = p.quadrature_tol / static_cast<double>(p.grid.size());
  ProfileIntegrator in(model, p, cell_tol);

  for (std::size_t k = 0; k + 1 < p.grid.size(); ++k) {
    // f'' jumps at R1: skip the two cells touching it.
    if (k + 1 == p.R1_index || k == p.R1_index) {
      ++report.midpoints_excluded;
      continue;
    }
    const double r = 0.5 * (p.grid[k] + p.grid[k + 1]);
    const double kappa = model.kappa(r);
    double lhs = 0.0;
    double f = 0.0;
    if (r < p.R1) {
      const double phi = in.phi_at(r, k);
      const double Phi = in.Phi_at(r, k);
      const double g = in.g_at(r, k);
      f = in.f_at(r, k);
      const double kappa_minus = kappa < 0.0 ? -kappa : 0.0;
      const double dphi = -0.25 * r * kappa_minus * phi;
      const double dg = -0.5 * p.c * Phi / phi;
      const double df = phi * g;
      const double ddf = dphi * g + phi * dg;
      lhs = ddf - 0.25 * r * kappa * df;
    } else {
      f = p.f(r);
      lhs = -0.125 * r * kappa * p.phi_R0;
    }
    const double rhs = -0.5 * p.c * f;
    const double violation = lhs - rhs;
    ++report.midpoints_checked;
    if (!std::isfinite(violation)) {
      report.failures.push_back({r, lhs, rhs});
      continue;
    }
    report.max_violation = std::max(report.max_violation, violation);
    if (violation > tolerance) report.failures.push_back({r, lhs, rhs});
  }
  return report;
}

double omega(const PotentialModel& model, double delta) {
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
  if (delta == 0.0) return 0.0;
  auto h = [&](double s) { return s * model.kappa_negative_part(s); };
  constexpr int kGrid = 1000;
  double best = 0.0;
  int best_k = 0;
  for (int k = 0; k <= kGrid; ++k) {
    const double v = h(delta * k / kGrid);
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  if (best_k > 0) {
    const double lo = delta * (best_k - 1) / kGrid;
    const double hi = delta * std::min(best_k + 1, kGrid) / kGrid;
    best = std::max(best, h(numerics::golden_section_max(h, lo, hi, 1e-14)));
  }
  return best;
}

double theorem_constant(double C_moment) {
  if (!(C_moment >= 0.0)) throw std::invalid_argument("moment bound must be nonnegative");
  return (1.0 + std::sqrt(2.0)) * std::sqrt(C_moment);
}

double theorem_bound(const RateProfile& profile, double W_f_initial, double C_moment,
                     std::size_t N, double t) {
  if (N < 2) throw std::invalid_argument("theorem bound needs N >= 2");
  if (!(t >= 0.0)) throw std::invalid_argument("time must be nonnegative");
  if (!(profile.decay_rate > 0.0)) throw HypothesisError("decay rate 2(c - eta) is not positive");
  const double transient = std::exp(-profile.decay_rate * t) * W_f_initial;
  const double chaos = theorem_constant(C_moment) * profile.eta /
                       (profile.decay_rate * std::sqrt(static_cast<double>(N)));
  return transient + chaos;
}

double discretization_allowance(const RateProfile& profile, const PotentialModel& model,
                                double delta) {
  if (!(profile.decay_rate > 0.0)) throw HypothesisError("decay rate 2(c - eta) is not positive");
  return (omega(model, delta) + 2.0 * profile.c * profile.f(delta)) / profile.decay_rate;
}

}  // namespace mfchaos
