#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mfchaos/errors.hpp"
#include "mfchaos/model.hpp"
#include "mfchaos/rates.hpp"

using namespace mfchaos;

namespace {

// Bisection oracle, independent of the library's root finders.
template <typename Fn>
double bisect(Fn fn, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (fn(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Composite Simpson on a uniform grid.
template <typename Fn>
double simpson(Fn fn, double a, double b, int panels = 20000) {
  const double h = (b - a) / panels;
  double s = fn(a) + fn(b);
  for (int i = 1; i < panels; ++i) s += fn(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

PotentialModel constant_kappa(double k, double floor) {
  ModelParts p;
  p.name = "constant";
  p.grad_V = [](std::span<const double> x, std::span<double> out) { out[0] = x[0]; };
  p.grad_W = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  p.kappa = [k](double) { return k; };
  p.tail = {floor, 0.0};
  p.kappa_monotone_from = 0.0;
  p.M_V = 0.0;
  p.m_V = 0.5;
  return PotentialModel(std::move(p));
}

}  // namespace

TEST_CASE("quadratic profile matches closed forms") {
  const auto m = builtin_quadratic(1.0, 0.0);
  const auto p = tabulate_profile(m, 0.0);
  const double R1 = 2.0 * std::sqrt(2.0);
  CHECK(p.R0 == 0.0);
  CHECK(p.R1 == doctest::Approx(R1).epsilon(1e-9));
  CHECK(p.c == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(p.phi_R0 == 1.0);
  // Between grid points f is linear: error <= step^2 |f''| / 8 ~ 1e-8 here.
  CHECK(std::abs(p.f(1.0) - 47.0 / 48.0) < 5e-8);
  CHECK(p.f(R1) == doctest::Approx(5.0 * std::sqrt(2.0) / 3.0).epsilon(1e-9));
  // Affine beyond R1 with slope phi(R0)/2.
  CHECK(p.f(R1 + 4.0) - p.f(R1) == doctest::Approx(2.0).epsilon(1e-12));
  for (double r : {0.1, 0.5, 1.3, 2.0, 2.7}) {
    CHECK(p.Phi(r) == doctest::Approx(r).epsilon(1e-9));
    CHECK(p.g(r) == doctest::Approx(1.0 - r * r / 16.0).epsilon(1e-6));
    CHECK(p.f(r) == doctest::Approx(r - r * r * r / 48.0).epsilon(1e-6));
  }
  CHECK(p.f_tab.front() == 0.0);
  for (std::size_t k = p.R1_index; k < p.grid.size(); ++k) CHECK(p.g_tab[k] == 0.5);
  CHECK(p.grid[p.R1_index] == p.R1);
  CHECK(p.decay_rate == doctest::Approx(0.5));
}

TEST_CASE("R0 and R1 on analytic cases") {
  CHECK(compute_R0(builtin_quadratic(1.0, 0.0)) == 0.0);
  CHECK(compute_R1(builtin_quadratic(4.0, 0.0), 0.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(compute_R0(builtin_double_well(1.0, 0.0, 1)) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(compute_R0(builtin_double_well(0.5, 0.0, 1)) == doctest::Approx(1.0).epsilon(1e-9));

  const double R0 = std::sqrt(2.0);
  const double R1 = bisect([&](double s) { return s * (s - R0) * (s * s - 2.0) - 8.0; }, R0, 10.0);
  CHECK(R1 == doctest::Approx(2.362).epsilon(1e-3));
  const double got = compute_R1(builtin_double_well(1.0, 0.0, 1), R0);
  CHECK(std::abs(got - R1) < 1e-8);
}

TEST_CASE("R1 satisfies its defining inequality beyond R1") {
  const auto m = builtin_double_well(1.0, 0.0, 1);
  const double R0 = compute_R0(m);
  const double R1 = compute_R1(m, R0);
  CHECK(R1 >= R0);
  for (int k = 0; k < 1000; ++k) {
    const double r = R1 + 10.0 * R1 * k / 1000.0;
    CHECK(R1 * (R1 - R0) * m.kappa(r) >= 8.0 - 1e-6);
  }
}

TEST_CASE("R0 rejects a tail certificate contradicted by kappa") {
  ModelParts p;
  p.name = "liar";
  p.grad_V = [](std::span<const double> x, std::span<double> out) { out[0] = x[0]; };
  p.grad_W = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  p.kappa = [](double r) { return r > 5.0 && r < 6.0 ? -1.0 : 1.0; };
  p.tail = {1.0, 1.0};
  p.M_V = 0.0;
  p.m_V = 0.5;
  const PotentialModel m(std::move(p));
  CHECK_THROWS_AS(compute_R0(m), HypothesisError);
}

TEST_CASE("R1 fails when the tail is too weak") {
  CHECK_THROWS_AS(compute_R1(constant_kappa(1e-14, 1e-14), 0.0), HypothesisError);
}

TEST_CASE("double-well c matches an independent quadrature") {
  for (double a : {0.5, 1.0}) {
    const auto m = builtin_double_well(a, 0.0, 1);
    const auto p = tabulate_geometry(m);
    const double R0 = std::sqrt(2.0 * a);
    auto I = [&](double r) {
      const double s = std::min(r, R0);
      return a * s * s - s * s * s * s / 4.0;  // int_0^s t (2a - t^2) dt
    };
    auto phi = [&](double r) { return std::exp(-I(r) / 4.0); };
    auto Phi = [&](double r) { return simpson(phi, 0.0, r, 2000); };
    const double R1 = bisect(
        [&](double s) { return s * (s - R0) * (s * s - 2.0 * a) - 8.0; }, R0, 10.0);
    const double c = 1.0 / simpson([&](double r) { return Phi(r) / phi(r); }, 0.0, R1, 2000);
    CHECK(p.c == doctest::Approx(c).epsilon(1e-8));
    CHECK(p.phi_R0 == doctest::Approx(phi(R0)).epsilon(1e-12));
  }
}

TEST_CASE("c is stable under grid refinement") {
  const auto m = builtin_double_well(1.0, 0.0, 1);
  ProfileOptions coarse, fine;
  coarse.cells = 5000;
  fine.cells = 10000;
  const auto a = tabulate_geometry(m, coarse);
  const auto b = tabulate_geometry(m, fine);
  CHECK(std::abs(a.c - b.c) <= 2.0 * fine.quadrature_tol);
}

TEST_CASE("profile invariants on both built-in models") {
  for (const auto& m : {builtin_quadratic(1.0, 0.0), builtin_double_well(1.0, 0.01, 1),
                        builtin_double_well(0.5, 0.01, 1)}) {
    const auto p = tabulate_geometry(m);
    REQUIRE(p.grid.front() == 0.0);
    REQUIRE(p.grid.back() >= 2.0 * p.R1);
    REQUIRE(p.grid[p.R0_index] == p.R0);
    for (std::size_t k = 0; k < p.grid.size(); ++k) {
      const double r = p.grid[k];
      if (k > 0) {
        CHECK(p.grid[k] > p.grid[k - 1]);
        CHECK(p.phi_tab[k] <= p.phi_tab[k - 1]);
        CHECK(p.f_tab[k] >= p.f_tab[k - 1]);
      }
      if (r >= p.R0) CHECK(p.phi_tab[k] == p.phi_R0);
      CHECK(p.g_tab[k] >= 0.5);
      CHECK(p.g_tab[k] <= 1.0);
      CHECK(p.phi_R0 * r / 2.0 <= p.Phi_tab[k] / 2.0 + 1e-12);
      CHECK(p.Phi_tab[k] / 2.0 <= p.f_tab[k] + 1e-12);
      CHECK(p.f_tab[k] <= p.Phi_tab[k] + 1e-12);
      CHECK(p.Phi_tab[k] <= r + 1e-12);
      if (k > 0 && k + 1 < p.grid.size()) {
        // Concavity: slopes of consecutive chords do not increase.
        const double s0 = (p.f_tab[k] - p.f_tab[k - 1]) / (p.grid[k] - p.grid[k - 1]);
        const double s1 = (p.f_tab[k + 1] - p.f_tab[k]) / (p.grid[k + 1] - p.grid[k]);
        CHECK(s1 <= s0 + 1e-9);
      }
    }
    const double fR1 = p.f(p.R1);
    for (double r : {p.R1 + 0.5, p.R1 + 3.0, 3.0 * p.R1}) {
      CHECK(p.f(r) == doctest::Approx(fR1 + p.phi_R0 * (r - p.R1) / 2.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("f inequality holds on both built-in models") {
  for (const auto& m : {builtin_quadratic(1.0, 0.0), builtin_double_well(1.0, 0.01, 1),
                        builtin_double_well(0.5, 0.01, 1)}) {
    const auto p = tabulate_geometry(m);
    const auto rep = verify_f_inequality(p, m);
    CHECK(rep.passed());
    CHECK(rep.midpoints_checked >= 1000);
    CHECK(rep.max_violation <= 1e-8);
  }
}

TEST_CASE("f inequality at r = 1 for the quadratic model, by hand") {
  // f = r - r^3/48: f' = 1 - r^2/16, f'' = -r/8, kappa = 1, c = 1/4.
  const double r = 1.0;
  const double lhs = -r / 8.0 - r * (1.0 - r * r / 16.0) / 4.0;
  const double rhs = -0.25 * (r - r * r * r / 48.0) / 2.0;
  CHECK(lhs == doctest::Approx(-0.359375));
  CHECK(rhs == doctest::Approx(-0.122396).epsilon(1e-5));
  CHECK(lhs <= rhs);
}

TEST_CASE("omega") {
  CHECK(omega(builtin_quadratic(1.0, 0.0), 3.0) == 0.0);
  const auto m = builtin_double_well(1.0, 0.0, 1);
  CHECK(omega(m, 0.0) == 0.0);
  CHECK(omega(m, 0.5) == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(omega(m, 2.0) ==
        doctest::Approx(4.0 / 3.0 * std::sqrt(2.0 / 3.0)).epsilon(1e-10));
  const double w1 = omega(m, 1e-1), w2 = omega(m, 1e-2), w3 = omega(m, 1e-3);
  CHECK(w1 > w2);
  CHECK(w2 > w3);
  CHECK(w3 < 3e-3);
  double prev = 0.0;
  for (double d = 0.0; d < 3.0; d += 0.05) {
    const double w = omega(m, d);
    CHECK(w >= prev - 1e-15);
    prev = w;
  }
}

TEST_CASE("admissibility gate") {
  const auto p = tabulate_geometry(builtin_quadratic(1.0, 0.0));
  CHECK_NOTHROW(admit_eta(p, 0.2));
  CHECK_THROWS_AS(admit_eta(p, 0.25), HypothesisError);
  CHECK_THROWS_AS(tabulate_profile(builtin_double_well(1.0, 5.0, 1),
                                   conservative_eta(builtin_double_well(1.0, 5.0, 1))),
                  HypothesisError);
}

TEST_CASE("theorem bound") {
  const auto m = builtin_quadratic(1.0, 0.0);
  const auto p = tabulate_profile(m, 0.05);
  const double C = gronwall_moment_bound(m, 0.05, 0.0);
  const double Cemp = theorem_constant(C);
  CHECK(Cemp == doctest::Approx((1.0 + std::sqrt(2.0)) * std::sqrt(C)));
  CHECK(theorem_bound(p, 1.0, C, 100, 0.0) ==
        doctest::Approx(1.0 + Cemp * 0.005 / 0.4).epsilon(1e-9));
  CHECK(theorem_bound(p, 1.0, C, 100, 1e6) ==
        doctest::Approx(Cemp * 0.005 / 0.4).epsilon(1e-9));

  const auto p0 = tabulate_profile(m, 0.0);
  CHECK(theorem_bound(p0, 2.0, C, 10, 3.0) == doctest::Approx(2.0 * std::exp(-0.5 * 3.0)));

  double prev = 1e300;
  for (double t = 0.0; t < 20.0; t += 0.5) {
    const double b = theorem_bound(p, 1.0, C, 64, t);
    CHECK(b <= prev);
    prev = b;
  }
  prev = 1e300;
  for (std::size_t N : {2u, 4u, 16u, 100u, 1000u}) {
    const double b = theorem_bound(p, 1.0, C, N, 1.0);
    CHECK(b <= prev);
    prev = b;
  }
  // The constant dominates the proof's N-dependent factor for every N >= 2.
  for (std::size_t N = 2; N < 5000; N += 7) {
    const double n = static_cast<double>(N);
    CHECK((1.0 / std::sqrt(n - 1.0) + std::sqrt(2.0) / n) * std::sqrt(n) <= 1.0 + std::sqrt(2.0));
  }
  RateProfile bad = p;
  bad.decay_rate = 0.0;
  CHECK_THROWS_AS(theorem_bound(bad, 1.0, C, 10, 1.0), HypothesisError);
}
