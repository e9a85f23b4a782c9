#include "mfchaos/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfchaos/cloud.hpp"
#include "mfchaos/errors.hpp"
#include "mfchaos/numerics.hpp"
#include "mfchaos/philox.hpp"

namespace mfchaos {

namespace {

std::string format_point(std::span<const double> v) {
  std::string s = "(";
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k > 0) s += ", ";
    s += fmt::format("{:.6g}", v[k]);
  }
  return s + ")";
}

// M_V = sup_r (m_V - kappa(r)) r^2 over [0, 2 r*], grid scan refined by golden section.
double derive_M_V(const ScalarProfile& kappa, double m_V, double radius) {
  const double r_hi = std::max(2.0 * radius, 1.0);
  constexpr int kGrid = 10000;
  auto excess = [&](double r) { return (m_V - kappa(r)) * r * r; };
  double best = 0.0;
  int best_k = 0;
  for (int k = 0; k <= kGrid; ++k) {
    const double r = r_hi * k / kGrid;
    const double v = excess(r);
    if (!std::isfinite(v)) throw NumericalError("kappa is not finite while deriving M_V");
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  if (best_k > 0) {
    const double lo = r_hi * (best_k - 1) / kGrid;
    const double hi = r_hi * std::min(best_k + 1, kGrid) / kGrid;
    best = std::max(best, excess(numerics::golden_section_max(excess, lo, hi, 1e-12)));
  }
  return best;
}

}  // namespace

PotentialModel::PotentialModel(ModelParts parts) : parts_(std::move(parts)) {
  if (parts_.dim == 0) throw std::invalid_argument("model dimension must be positive");
  if (!parts_.grad_V || !parts_.grad_W || !parts_.kappa) {
    throw std::invalid_argument("model requires grad_V, grad_W and kappa");
  }
  if (!(parts_.tail.floor > 0.0) || !(parts_.tail.radius >= 0.0)) {
    throw std::invalid_argument("kappa tail certificate needs floor > 0 and radius >= 0");
  }
  if (!(parts_.lip_W >= 0.0)) throw std::invalid_argument("lip_W must be nonnegative");
  if (!parts_.m_V) parts_.m_V = parts_.tail.floor / 2.0;
  if (!parts_.M_V) parts_.M_V = derive_M_V(parts_.kappa, *parts_.m_V, parts_.tail.radius);
  if (!(*parts_.m_V > 0.0) || !(*parts_.M_V >= 0.0)) {
    throw std::invalid_argument("need m_V > 0 and M_V >= 0");
  }
  std::vector<double> zero(parts_.dim, 0.0);
  std::vector<double> g(parts_.dim, 0.0);
  parts_.grad_V(zero, g);
  grad_V0_norm_ = norm(g);
}

PotentialModel builtin_double_well(double a, double lambda, int sign, std::size_t dim) {
  if (!(a > 0.0)) throw std::invalid_argument("double well requires a > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("double well requires lambda >= 0");
  if (sign != 1 && sign != -1) throw std::invalid_argument("interaction sign must be +1 or -1");
  const double k = 2.0 * sign * lambda;
  ModelParts p;
  p.name = "double_well";
  p.dim = dim;
  p.grad_V = [a](std::span<const double> x, std::span<double> out) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double s = 4.0 * r2 - 2.0 * a;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  };
  p.grad_W = [k](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = k * x[i];
  };
  p.kappa = [a](double r) { return r * r - 2.0 * a; };
  // kappa(2 sqrt(a)) = 2a and kappa is increasing.
  p.tail = {2.0 * a, 2.0 * std::sqrt(a)};
  p.kappa_monotone_from = 0.0;
  p.lip_W = 2.0 * lambda;
  if (sign > 0 || lambda == 0.0) p.M_W = 0.0;
  p.interaction_coefficient = k;
  return PotentialModel(std::move(p));
}

PotentialModel builtin_quadratic(double rho, double lambda, std::size_t dim) {
  if (!(rho > 0.0)) throw std::invalid_argument("quadratic model requires rho > 0");
  const double k = 2.0 * lambda;
  ModelParts p;
  p.name = "quadratic";
  p.dim = dim;
  p.grad_V = [rho](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = rho * x[i];
  };
  p.grad_W = [k](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = k * x[i];
  };
  p.kappa = [rho](double) { return rho; };
  p.tail = {rho, 0.0};
  p.kappa_monotone_from = 0.0;
  p.lip_W = 2.0 * std::abs(lambda);
  p.m_V = rho;
  p.M_V = 0.0;
  // A repulsive quadratic interaction has no finite M_W.
  if (lambda >= 0.0) p.M_W = 0.0;
  p.confinement_coefficient = rho;
  p.interaction_coefficient = k;
  return PotentialModel(std::move(p));
}

bool ValidationReport::assumptions_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

// Tracks the worst sample of a pairwise check.
struct WorstTracker {
  double worst = std::numeric_limits<double>::infinity();
  bool non_finite = false;
  std::string where;

  void observe(double slack, std::span<const double> x, std::span<const double> y) {
    if (!std::isfinite(slack)) {
      if (!non_finite) where = "non-finite value at x=" + format_point(x) + " y=" + format_point(y);
      non_finite = true;
      return;
    }
    if (slack < worst) {
      worst = slack;
      if (!non_finite) where = "x=" + format_point(x) + " y=" + format_point(y);
    }
  }

  CheckResult result(std::string name, double tol) const {
    CheckResult r;
    r.name = std::move(name);
    r.worst = worst;
    r.passed = !non_finite && worst >= -tol;
    r.detail = (r.passed ? "worst sample " : "violated at ") + where;
    return r;
  }
};

}  // namespace

ValidationReport validate_assumptions(const PotentialModel& model, double eta,
                                      const ScalarProfile& f, double c, std::size_t samples,
                                      std::uint64_t seed) {
  if (samples < 1000) throw std::invalid_argument("validation needs at least 1000 samples");
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
  const std::size_t d = model.dim();
  const double box = 2.0 * std::max(model.tail().radius, 1.0) + 2.0;
  const NoiseSource noise(seed, 0);

  std::vector<double> x(d), y(d), diff(d), gx(d), gy(d), wx(d), wy(d), wneg(d), xneg(d);

  WorstTracker curvature, interaction, symmetry, linear_growth, assumption3;
  constexpr double kRelTol = 1e-9;

  auto draw = [&](std::uint64_t index, std::uint32_t which, std::span<double> out) {
    for (std::size_t k = 0; k < d; k += 2) {
      const auto uu =
          noise.uniforms(Channel::kValidation, which, index, static_cast<std::uint32_t>(k / 2));
      out[k] = box * (2.0 * uu[0] - 1.0);
      if (k + 1 < d) out[k + 1] = box * (2.0 * uu[1] - 1.0);
    }
  };

  for (std::size_t s = 0; s < samples; ++s) {
    draw(s, 0, x);
    if (s % 2 == 0) {
      draw(s, 1, y);
    } else {
      // Close pairs: log-uniform separation in [1e-3, box].
      const auto scale_u = noise.uniforms(Channel::kValidation, 2, s, 0);
      const double sep = 1e-3 * std::pow(box / 1e-3, scale_u[0]);
      noise.gaussians(Channel::kValidation, 3, s, std::span<double>(diff));
      const double n = std::max(1e-300, norm(diff));
      for (std::size_t k = 0; k < d; ++k) y[k] = x[k] + sep * diff[k] / n;
    }
    double r2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      diff[k] = x[k] - y[k];
      r2 += diff[k] * diff[k];
    }
    const double r = std::sqrt(r2);
    if (r == 0.0) continue;

    model.grad_V(x, gx);
    model.grad_V(y, gy);
    double inner = 0.0;
    for (std::size_t k = 0; k < d; ++k) inner += (gx[k] - gy[k]) * diff[k];
    const double kr = model.kappa(r) * r2;
    curvature.observe((inner - kr) / (r2 * (1.0 + std::abs(model.kappa(r)))), x, y);

    model.grad_W(x, wx);
    model.grad_W(y, wy);
    double wdiff2 = 0.0;
    double winner = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      wdiff2 += (wx[k] - wy[k]) * (wx[k] - wy[k]);
      winner += (wx[k] - wy[k]) * diff[k];
    }
    const double wdiff = std::sqrt(wdiff2);
    interaction.observe((eta * f(r) - wdiff) / (1.0 + wdiff), x, y);

    for (std::size_t k = 0; k < d; ++k) xneg[k] = -x[k];
    model.grad_W(xneg, wneg);
    double asym = 0.0;
    double wx2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      asym += (wneg[k] + wx[k]) * (wneg[k] + wx[k]);
      wx2 += wx[k] * wx[k];
    }
    symmetry.observe(-std::sqrt(asym) / (1.0 + std::sqrt(wx2)), x, xneg);

    double x2 = 0.0;
    for (double v : x) x2 += v * v;
    linear_growth.observe((eta * std::sqrt(x2) - std::sqrt(wx2)) / (1.0 + std::sqrt(wx2)), x, x);

    if (model.M_W()) assumption3.observe((winner + *model.M_W()) / (1.0 + std::abs(winner)), x, y);
  }

  ValidationReport report;
  report.eta = eta;
  report.c = c;
  report.checks.push_back(curvature.result("curvature_kappa", kRelTol));
  report.checks.push_back(interaction.result("interaction_eta_f", kRelTol));

  {
    std::vector<double> zero(d, 0.0), w0(d);
    model.grad_W(zero, w0);
    double n0 = 0.0;
    for (double v : w0) n0 += v * v;
    auto sym = symmetry.result("grad_W_antisymmetric", 1e-12);
    if (!(std::sqrt(n0) <= 1e-12)) {
      sym.passed = false;
      sym.detail = fmt::format("|grad W(0)| = {:.3e}", std::sqrt(n0));
    }
    report.checks.push_back(std::move(sym));
  }
  report.checks.push_back(linear_growth.result("grad_W_linear_growth", kRelTol));
  if (model.M_W()) report.checks.push_back(assumption3.result("interaction_lower_bound_M_W", kRelTol));

  // Certified tail and continuity of kappa on a grid.
  {
    const auto& tail = model.tail();
    const double span = 10.0 * (1.0 + tail.radius);
    constexpr int kGrid = 10000;
    CheckResult tail_check{"kappa_tail_certificate", true, std::numeric_limits<double>::infinity(),
                           ""};
    for (int k = 0; k <= kGrid; ++k) {
      const double r = tail.radius + span * k / kGrid;
      const double v = model.kappa(r);
      const double slack = v - tail.floor;
      if (!std::isfinite(v) || slack < tail_check.worst) {
        tail_check.worst = std::isfinite(v) ? slack : -std::numeric_limits<double>::infinity();
        tail_check.detail = fmt::format("worst at r={:.6g}, kappa={:.6g}", r, v);
      }
    }
    tail_check.passed = tail_check.worst >= -1e-12;
    report.checks.push_back(std::move(tail_check));

    const double r_hi = std::max(2.0 * tail.radius, 4.0);
    constexpr double kStep = 1e-3;
    CheckResult cont{"kappa_continuity", true, 0.0, ""};
    double prev = model.kappa(0.0);
    const auto steps = static_cast<int>(std::ceil(r_hi / kStep));
    for (int k = 1; k <= steps; ++k) {
      const double r = k * kStep;
      const double v = model.kappa(r);
      const double jump = std::isfinite(v) && std::isfinite(prev)
                              ? std::abs(v - prev)
                              : std::numeric_limits<double>::infinity();
      if (jump > cont.worst) {
        cont.worst = jump;
        cont.detail = fmt::format("largest jump {:.3e} at r={:.6g}", jump, r);
      }
      prev = v;
    }
    cont.passed = cont.worst <= model.kappa_jump_bound();
    report.checks.push_back(std::move(cont));

    if (auto from = model.kappa_monotone_from()) {
      CheckResult mono{"kappa_monotone_tail", true, 0.0, ""};
      const double hi = std::max(*from, tail.radius) + span;
      double last = model.kappa(*from);
      for (int k = 1; k <= kGrid; ++k) {
        const double r = *from + (hi - *from) * k / kGrid;
        const double v = model.kappa(r);
        const double drop = last - v;
        if (!(drop <= 1e-12 * (1.0 + std::abs(v)))) {
          mono.passed = false;
          mono.worst = std::max(mono.worst, std::isfinite(drop) ? drop : 1e300);
          mono.detail = fmt::format("kappa decreases near r={:.6g}", r);
        }
        last = v;
      }
      report.checks.push_back(std::move(mono));
    }
  }

  report.eta_below_c = eta < c;
  report.eta_below_half_m_V = eta < model.m_V() / 2.0;
  report.moment_hypothesis = model.M_W().has_value() || report.eta_below_half_m_V;
  return report;
}

double gronwall_moment_bound(const PotentialModel& model, double eta, double second_moment_0) {
  if (!(second_moment_0 >= 0.0)) throw std::invalid_argument("second moment must be >= 0");
  const double d = static_cast<double>(model.dim());
  const double g = model.grad_V_origin_norm();
  const double m_V = model.m_V();
  const double M_V = model.M_V();

  // Positive root u = s^2 of  K + 2 g s - a s^2 = 0: beyond it the
  // right-hand side of du/dt <= K + 2 g sqrt(u) - a u is negative.
  auto fixed_point = [g](double a, double K) {
    const double s = (g + std::sqrt(g * g + a * K)) / a;
    return s * s;
  };

  double best = std::numeric_limits<double>::infinity();
  if (auto M_W = model.M_W()) {
    best = std::min(best, fixed_point(2.0 * m_V, 2.0 * M_V + *M_W + 2.0 * d));
  }
  if (eta < m_V / 2.0) {
    best = std::min(best, fixed_point(2.0 * (m_V - eta), 2.0 * M_V + 2.0 * d));
  }
  if (!std::isfinite(best)) {
    throw HypothesisError(fmt::format(
        "moment bound needs M_W or eta < m_V/2 (eta={:.6g}, m_V={:.6g})", eta, m_V));
  }
  return std::max(best, second_moment_0);
}

}  // namespace mfchaos
