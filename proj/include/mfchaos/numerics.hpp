#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace mfchaos::numerics {

namespace detail {

template <typename F>
double simpson_step(F& fn, double a, double fa, double b, double fb, double whole, double fm,
                    double tol, int depth, bool& ok) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = fn(lm);
  const double frm = fn(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || depth <= 0 || (m - a) < 1e-15 * (1.0 + std::abs(a))) {
    if (depth <= 0 && std::abs(delta) > 15.0 * tol) ok = false;
    return left + right + delta / 15.0;
  }
  return simpson_step(fn, a, fa, m, fm, left, flm, 0.5 * tol, depth - 1, ok) +
         simpson_step(fn, m, fm, b, fb, right, frm, 0.5 * tol, depth - 1, ok);
}

}  // namespace detail

/// Adaptive Simpson quadrature of fn over [a, b] with absolute tolerance tol.
/// `converged` (optional) is cleared when the depth limit was hit before the
/// local error estimate met its share of the tolerance.
template <typename F>
double adaptive_simpson(F&& fn, double a, double b, double tol, int max_depth = 40,
                        bool* converged = nullptr) {
  if (b == a) return 0.0;
  const double fa = fn(a);
  const double fb = fn(b);
  const double fm = fn(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  bool ok = true;
  const double v = detail::simpson_step(fn, a, fa, b, fb, whole, fm, tol, max_depth, ok);
  if (converged != nullptr) *converged = ok;
  return v;
}

/// Bisection for the switch point of a monotone predicate: requires
/// pred(lo) == false and pred(hi) == true; returns a point within tol of
/// the boundary (the `hi` side, so pred holds there).
template <typename Pred>
double bisect_predicate(Pred&& pred, double lo, double hi, double tol) {
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// Golden-section maximisation of a unimodal fn on [a, b]; returns the argmax.
template <typename F>
double golden_section_max(F&& fn, double a, double b, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = fn(c);
  double fd = fn(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = fn(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace mfchaos::numerics
