#include <cmath>

#include "doctest.h"
#include "mfchaos/errors.hpp"
#include "mfchaos/metrics.hpp"
#include "mfchaos/simulate.hpp"

using namespace mfchaos;

namespace {

PotentialModel free_model() {
  ModelParts p;
  p.name = "free";
  p.grad_V = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  p.grad_W = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  p.kappa = [](double) { return 1.0; };
  p.tail = {1.0, 0.0};
  p.M_V = 0.0;
  p.m_V = 0.5;
  p.confinement_coefficient = 0.0;
  p.interaction_coefficient = 0.0;
  return PotentialModel(std::move(p));
}

SimConfig ou_config(std::size_t N, double h, double t_end, double x0_bar, double x0) {
  SimConfig c;
  c.N = N;
  c.M = 4096;
  c.dim = 1;
  c.h = h;
  c.t_end = t_end;
  c.delta = default_delta(h);
  c.seed = 99;
  c.nu = {LawKind::kPoint, {x0_bar}, 0.0};
  c.mu = {LawKind::kPoint, {x0}, 0.0};
  c.output_times = {0.0, t_end};
  return c;
}

}  // namespace

TEST_CASE("mixing functions") {
  const auto mix = make_mixing(0.4);
  CHECK(mix.reflection_weight(0.4) == 1.0);
  CHECK(mix.synchronous_weight(0.4) == 0.0);
  CHECK(mix.reflection_weight(0.2) == 0.0);
  CHECK(mix.synchronous_weight(0.2) == 1.0);
  CHECK(mix.reflection_weight(0.3) == doctest::Approx(0.5));
  CHECK(mix.synchronous_weight(0.3) == doctest::Approx(std::sqrt(3.0) / 2.0));
  for (double r = 0.0; r < 1.0; r += 0.001) {
    const double a = mix.reflection_weight(r), b = mix.synchronous_weight(r);
    CHECK(std::abs(a * a + b * b - 1.0) <= 1e-12);
    // Lipschitz with constant 2 / delta.
    CHECK(std::abs(mix.reflection_weight(r + 1e-3) - a) <= 2.0 / 0.4 * 1e-3 + 1e-15);
  }
  const std::vector<double> x{0.3 * 0.6, 0.3 * 0.8};
  CHECK(mix.phi_r(x) == doctest::Approx(0.5));
  CHECK_THROWS_AS(make_mixing(0.0), std::invalid_argument);
  CHECK(default_delta(0.01) == doctest::Approx(1.0));
}

TEST_CASE("step_particles: deterministic cases") {
  const auto free = free_model();
  Cloud s(3, 1);
  s[0][0] = 1.0;
  s[1][0] = -2.0;
  s[2][0] = 5.0;
  const Cloud before = s;
  step_particles(s, free, 0.1, Cloud(3, 1));
  CHECK(s == before);

  Cloud q(2, 1);
  q[0][0] = 1.0;
  q[1][0] = 1.0;
  step_particles(q, builtin_quadratic(1.0, 0.0), 0.1, Cloud(2, 1));
  CHECK(q[0][0] == doctest::Approx(0.9));

  // Double well a = 1, lambda = 0.5: drift on particle 1 at (1, 0) is
  // -(4 - 2) - (1/2)(2 * 0.5 * (1 - 0)) = -2.5.
  Cloud d(2, 1);
  d[0][0] = 1.0;
  d[1][0] = 0.0;
  step_particles(d, builtin_double_well(1.0, 0.5, 1), 0.01, Cloud(2, 1));
  CHECK(d[0][0] == doctest::Approx(1.0 - 0.025));
}

TEST_CASE("interaction drift closure agrees with the pairwise sum") {
  const auto m = builtin_double_well(1.0, 0.3, -1);
  ModelParts p;
  p.name = "pairwise";
  p.grad_V = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  p.grad_W = [](std::span<const double> x, std::span<double> out) { out[0] = -0.6 * x[0]; };
  p.kappa = [](double) { return 1.0; };
  p.tail = {1.0, 0.0};
  p.M_V = 0.0;
  const PotentialModel generic(std::move(p));
  Cloud c(5, 1);
  for (int i = 0; i < 5; ++i) c[i][0] = 0.7 * i - 1.1;
  std::vector<double> mean(1);
  mean_into(c, mean);
  std::vector<double> a(1), b(1);
  for (int i = 0; i < 5; ++i) {
    interaction_drift(m, c, mean, c[i], a);
    interaction_drift(generic, c, mean, c[i], b);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-13));
  }
}

TEST_CASE("step_particles flags blow-up") {
  Cloud s(2, 1);
  s[0][0] = 1e3;
  s[1][0] = -1e3;
  const auto m = builtin_double_well(1.0, 0.0, 1);
  CHECK_THROWS_AS(
      {
        for (int i = 0; i < 10; ++i) step_particles(s, m, 1.0, Cloud(2, 1));
      },
      NumericalError);
}

TEST_CASE("coupled noise: synchronous at E = 0, reflected beyond delta") {
  const auto mix = make_mixing(1.0);
  std::vector<double> nb(1), np(1);
  coupled_noise(mix, std::vector<double>{0.0}, std::vector<double>{0.7},
                std::vector<double>{-0.3}, nb, np);
  CHECK(nb[0] == -0.3);
  CHECK(np[0] == -0.3);
  coupled_noise(mix, std::vector<double>{1.5}, std::vector<double>{0.7},
                std::vector<double>{-0.3}, nb, np);
  CHECK(nb[0] == 0.7);
  CHECK(np[0] == doctest::Approx(-0.7));

  // Reflection across the hyperplane orthogonal to E in d = 3 is an isometry.
  std::vector<double> E{1.0, 2.0, -2.0}, G{0.3, -1.1, 0.4}, Z(3, 0.0), b3(3), p3(3);
  coupled_noise(mix, E, G, Z, b3, p3);
  CHECK(norm(b3) == doctest::Approx(norm(G)));
  CHECK(norm(p3) == doctest::Approx(norm(G)));
  CHECK(dot(p3, E) == doctest::Approx(-dot(G, E)));
}

TEST_CASE("initial laws") {
  const InitialLaw g{LawKind::kGaussian, {1.0, 2.0}, 0.5};
  CHECK(g.second_moment() == doctest::Approx(5.0 + 2.0 * 0.25));
  const InitialLaw b{LawKind::kUniformBall, {0.0, 0.0, 0.0}, 1.0};
  CHECK(b.coordinate_variance() == doctest::Approx(0.2));

  SimConfig c = ou_config(4000, 0.1, 0.0, 0.0, 0.0);
  c.dim = 3;
  c.nu = b;
  c.mu = b;
  c.coupling = InitialCoupling::kIndependent;
  c.output_times = {0.0};
  const NoiseSource noise(5, 0);
  const auto ens = initialize_ensemble(c, builtin_quadratic(1.0, 0.0, 3), noise);
  double m2 = 0.0, rmax = 0.0;
  for (std::size_t i = 0; i < c.N; ++i) {
    m2 += norm_sq(ens.X_bar[i]);
    rmax = std::max(rmax, norm(ens.X_bar[i]));
  }
  m2 /= static_cast<double>(c.N);
  CHECK(rmax <= 1.0);
  CHECK(std::abs(m2 - 0.6) < 4.0 * std::sqrt(0.6 * 0.6 * 0.1 / 4000.0));
  CHECK_FALSE(ens.X == ens.X_bar);

  c.coupling = InitialCoupling::kSynchronous;
  const auto sync = initialize_ensemble(c, builtin_quadratic(1.0, 0.0, 3), noise);
  CHECK(sync.X == sync.X_bar);
}

TEST_CASE("sim config validation") {
  SimConfig c = ou_config(2, 0.01, 1.0, 0.0, 0.0);
  CHECK_NOTHROW(c.validate());
  c.N = 1;
  CHECK_THROWS(c.validate());
  c = ou_config(2, 0.01, 1.0, 0.0, 0.0);
  c.output_times = {0.0, 0.505};
  CHECK_THROWS(c.validate());
  c = ou_config(2, 0.03, 1.0, 0.0, 0.0);
  CHECK_THROWS(c.validate());
}

TEST_CASE("linear closure matches the OU variance ODE") {
  LinearClosure cl{{3.0}, 0.0, 1.0, 0.0};
  cl.advance(1.0);
  CHECK(cl.variance == doctest::Approx(1.0 - std::exp(-2.0)));
  CHECK(cl.mean[0] == doctest::Approx(3.0 * std::exp(-1.0)));

  LinearClosure bm{{0.0}, 0.0, 0.0, 0.0};
  for (int i = 0; i < 10; ++i) bm.advance(0.1);
  CHECK(bm.variance == doctest::Approx(2.0));
}

TEST_CASE("Brownian reference ensemble has variance 2t") {
  const auto free = free_model();
  const std::size_t M = 20000;
  Cloud ref(M, 1);
  const NoiseSource noise(17, 0);
  const double h = 0.05;
  for (int step = 0; step < 20; ++step) {
    Cloud z(M, 1);
    for (std::size_t j = 0; j < M; ++j) noise.gaussians(Channel::kTest, step, j, z[j]);
    advance_reference(ref, free, h, z);
  }
  const double var = second_moment(ref);
  CHECK(std::abs(var - 2.0) < 3.0 * 2.0 * std::sqrt(2.0 / M));
}

TEST_CASE("reference ensemble agrees with the closure at t = 1") {
  const auto m = builtin_quadratic(1.0, 0.25);
  const std::size_t M = 20000;
  Cloud ref(M, 1);
  const NoiseSource noise(23, 0);
  for (std::size_t j = 0; j < M; ++j) {
    noise.gaussians(Channel::kTest, 0, j, ref[j]);
    ref[j][0] = 1.0 + 0.5 * ref[j][0];
  }
  LinearClosure cl{{1.0}, 0.25, 1.0, 0.5};
  const double h = 0.001;
  for (int step = 1; step <= 1000; ++step) {
    Cloud z(M, 1);
    for (std::size_t j = 0; j < M; ++j) noise.gaussians(Channel::kTest, step, j, z[j]);
    advance_reference(ref, m, h, z);
    cl.advance(h);
  }
  std::vector<double> mean(1);
  mean_into(ref, mean);
  double var = 0.0;
  for (std::size_t j = 0; j < M; ++j) var += (ref[j][0] - mean[0]) * (ref[j][0] - mean[0]);
  var /= static_cast<double>(M - 1);
  CHECK(std::abs(mean[0] - cl.mean[0]) < 3.0 * std::sqrt(cl.variance / M));
  CHECK(std::abs(var - cl.variance) < 3.0 * cl.variance * std::sqrt(2.0 / M));
}

TEST_CASE("identical starts and drifts keep E at zero") {
  const auto m = builtin_quadratic(1.0, 0.0);
  const auto p = tabulate_profile(m, 0.0);
  SimConfig c = ou_config(8, 0.01, 2.0, 0.0, 0.0);
  c.nu = {LawKind::kGaussian, {0.0}, 1.0};
  c.mu = c.nu;
  const auto recs = run_coupled(c, m, p, 0);
  REQUIRE(recs.size() == 2);
  for (const auto& r : recs) {
    CHECK(r.mean_f_distance == 0.0);
    CHECK(r.mean_euclid_distance == 0.0);
  }
}

TEST_CASE("run_coupled is deterministic and records the requested times") {
  const auto m = builtin_double_well(0.5, 0.01, 1);
  const auto p = tabulate_profile(m, 0.05);
  SimConfig c = ou_config(16, 0.01, 1.0, 0.0, 1.0);
  c.M = 256;
  c.output_times = {0.0, 0.5, 1.0};
  const auto a = run_coupled(c, m, p, 3);
  const auto b = run_coupled(c, m, p, 3);
  const auto other = run_coupled(c, m, p, 4);
  REQUIRE(a.size() == 3);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].t == c.output_times[k]);
    CHECK(a[k].mean_f_distance == b[k].mean_f_distance);
    CHECK(a[k].second_moment_nonlinear == b[k].second_moment_nonlinear);
    CHECK(a[k].upsilon_estimate == b[k].upsilon_estimate);
  }
  CHECK(a[2].mean_f_distance != other[2].mean_f_distance);
  CHECK(a[0].mean_f_distance == doctest::Approx(p.f(1.0)));
}

TEST_CASE("E stays X_bar - X and the particle side follows step_particles") {
  const auto m = builtin_double_well(1.0, 0.2, 1);
  SimConfig c = ou_config(6, 0.01, 0.1, 0.5, -0.5);
  c.M = 64;
  const NoiseSource noise(31, 2);
  auto ens = initialize_ensemble(c, m, noise);
  const auto mix = make_mixing(c.delta);
  for (int s = 0; s < 10; ++s) {
    // Rebuild the particle noise by hand and push a copy through step_particles.
    Cloud expect = ens.X;
    Cloud z(c.N, 1);
    for (std::size_t i = 0; i < c.N; ++i) {
      std::vector<double> G(1), Gs(1), nb(1), np(1);
      noise.gaussians(Channel::kReflected, ens.step, i, std::span<double>(G));
      noise.gaussians(Channel::kSynchronous, ens.step, i, std::span<double>(Gs));
      coupled_noise(mix, ens.E[i], G, Gs, nb, np);
      z[i][0] = np[0];
    }
    step_particles(expect, m, c.h, z);
    step_coupled(ens, m, mix, noise);
    for (std::size_t i = 0; i < c.N; ++i) {
      CHECK(ens.X[i][0] == doctest::Approx(expect[i][0]).epsilon(1e-14));
      CHECK(ens.E[i][0] == ens.X_bar[i][0] - ens.X[i][0]);
    }
  }
}

TEST_CASE("reflection coupling contracts E|E_t| for independent OU pairs") {
  const auto m = builtin_quadratic(1.0, 0.0);
  const auto p = tabulate_profile(m, 0.0);
  SimConfig c = ou_config(2, 0.01, 2.0, 0.0, 2.0);
  c.output_times = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  const std::size_t R = 10000;
  std::vector<double> sum(c.output_times.size()), sum2(c.output_times.size());
  for (std::size_t r = 0; r < R; ++r) {
    const auto recs = run_coupled(c, m, p, r);
    for (std::size_t k = 0; k < recs.size(); ++k) {
      sum[k] += recs[k].mean_euclid_distance;
      sum2[k] += recs[k].mean_euclid_distance * recs[k].mean_euclid_distance;
    }
  }
  for (std::size_t k = 1; k < sum.size(); ++k) {
    const double mean = sum[k] / R;
    const double se = std::sqrt((sum2[k] / R - mean * mean) / R);
    CHECK(mean <= sum[k - 1] / R + 3.0 * se);
  }
}

TEST_CASE("Euler step error of the coupled difference is first order") {
  // With delta huge the coupling is synchronous, so E_t is deterministic:
  // E_n = (1 - h)^n E_0 against the exact e^{-t} E_0.
  const auto m = builtin_quadratic(1.0, 0.0);
  const auto p = tabulate_profile(m, 0.0);
  std::vector<double> err;
  for (double h : {0.02, 0.01, 0.005}) {
    SimConfig c = ou_config(2, h, 1.0, 0.0, 1.0);
    c.delta = 1e6;
    const auto recs = run_coupled(c, m, p, 0);
    err.push_back(std::abs(recs.back().mean_euclid_distance - std::exp(-1.0)));
  }
  CHECK(err[0] / err[1] == doctest::Approx(2.0).epsilon(0.05));
  CHECK(err[1] / err[2] == doctest::Approx(2.0).epsilon(0.05));
}
