#include "mfchaos/simulate.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfchaos/errors.hpp"

namespace mfchaos {

namespace {

bool is_multiple_of(double t, double h, std::int64_t& steps) {
  steps = std::llround(t / h);
  return std::abs(static_cast<double>(steps) * h - t) <= 1e-9 * std::max(1.0, std::abs(t));
}

void sample_law(const InitialLaw& law, std::span<const double> z, double u,
                std::span<double> out) {
  const std::size_t d = out.size();
  switch (law.kind) {
    case LawKind::kPoint:
      for (std::size_t k = 0; k < d; ++k) out[k] = law.mean[k];
      break;
    case LawKind::kGaussian:
      for (std::size_t k = 0; k < d; ++k) out[k] = law.mean[k] + law.scale * z[k];
      break;
    case LawKind::kUniformBall: {
      const double zn = norm(z);
      const double radius = law.scale * std::pow(u, 1.0 / static_cast<double>(d));
      for (std::size_t k = 0; k < d; ++k) {
        out[k] = law.mean[k] + (zn > 0.0 ? radius * z[k] / zn : 0.0);
      }
      break;
    }
  }
}

void draw_initial(const NoiseSource& noise, Channel ch, std::uint64_t index, const InitialLaw& law,
                  std::span<double> z, std::span<double> out) {
  noise.gaussians(ch, 0, index, z);
  // Block 0xFFFFFF is never reached by the Gaussian blocks for any sane dimension.
  const double u = noise.uniforms(ch, 0, index, 0xFFFFFFu)[0];
  sample_law(law, z, u, out);
}

void check_finite(const Cloud& c, double t, const char* what) {
  for (double v : c.flat()) {
    if (!std::isfinite(v)) {
      throw NumericalError(
          fmt::format("non-finite {} state at t={:.6g}; step size too large?", what, t));
    }
  }
}

}  // namespace

double MixingFunctions::reflection_weight(double r) const {
  return std::clamp(2.0 * r / delta - 1.0, 0.0, 1.0);
}

double MixingFunctions::synchronous_weight(double r) const {
  const double pr = reflection_weight(r);
  return std::sqrt(std::max(0.0, 1.0 - pr * pr));
}

MixingFunctions make_mixing(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("mixing width delta must be positive");
  return MixingFunctions{delta};
}

double default_delta(double h) { return 10.0 * std::sqrt(h); }

double InitialLaw::coordinate_variance() const {
  switch (kind) {
    case LawKind::kPoint:
      return 0.0;
    case LawKind::kGaussian:
      return scale * scale;
    case LawKind::kUniformBall:
      return scale * scale / static_cast<double>(mean.size() + 2);
  }
  return 0.0;
}

double InitialLaw::second_moment() const {
  return norm_sq(mean) + static_cast<double>(mean.size()) * coordinate_variance();
}

void SimConfig::validate() const {
  if (N < 2) throw std::invalid_argument("simulation needs N >= 2");
  if (dim == 0) throw std::invalid_argument("dimension must be positive");
  if (!(h > 0.0)) throw std::invalid_argument("step size h must be positive");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(t_end >= 0.0)) throw std::invalid_argument("t_end must be nonnegative");
  if (nu.mean.size() != dim || mu.mean.size() != dim) {
    throw std::invalid_argument("initial law means must have the model dimension");
  }
  if (nu.scale < 0.0 || mu.scale < 0.0) throw std::invalid_argument("law scale must be >= 0");
  std::int64_t s = 0;
  if (!is_multiple_of(t_end, h, s)) throw std::invalid_argument("t_end must be a multiple of h");
  double prev = -1.0;
  for (double t : output_times) {
    std::int64_t k = 0;
    if (!(t > prev) || t > t_end * (1.0 + 1e-12) || !is_multiple_of(t, h, k)) {
      throw std::invalid_argument(fmt::format(
          "output time {} must be increasing, within [0, t_end] and a multiple of h", t));
    }
    prev = t;
  }
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(t_end / h)); }

void LinearClosure::advance(double dt) {
  const double decay = std::exp(-confinement * dt);
  for (auto& m : mean) m *= decay;
  const double rate = confinement + interaction;
  if (rate == 0.0) {
    variance += 2.0 * dt;
  } else {
    const double stationary = 1.0 / rate;
    variance = stationary + (variance - stationary) * std::exp(-2.0 * rate * dt);
  }
}

void interaction_drift(const PotentialModel& model, const Cloud& ensemble,
                       std::span<const double> ensemble_mean, std::span<const double> x,
                       std::span<double> out) {
  const std::size_t d = x.size();
  if (auto k = model.interaction_coefficient()) {
    for (std::size_t i = 0; i < d; ++i) out[i] = *k * (x[i] - ensemble_mean[i]);
    return;
  }
  std::vector<double> diff(d), g(d);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    const auto y = ensemble[j];
    for (std::size_t i = 0; i < d; ++i) diff[i] = x[i] - y[i];
    model.grad_W(diff, g);
    for (std::size_t i = 0; i < d; ++i) out[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(ensemble.size());
  for (auto& v : out) v *= inv;
}

void step_particles(Cloud& state, const PotentialModel& model, double h, const Cloud& noise) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  if (noise.size() != state.size() || noise.dim() != state.dim()) {
    throw std::invalid_argument("noise shape does not match state");
  }
  const std::size_t n = state.size();
  const std::size_t d = state.dim();
  std::vector<double> mean(d), gv(d), gw(d);
  mean_into(state, mean);
  const double amp = std::sqrt(2.0 * h);
  Cloud next(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = state[i];
    model.grad_V(x, gv);
    interaction_drift(model, state, mean, x, gw);
    auto y = next[i];
    const auto z = noise[i];
    for (std::size_t k = 0; k < d; ++k) y[k] = x[k] - h * (gv[k] + gw[k]) + amp * z[k];
  }
  check_finite(next, 0.0, "particle");
  state = std::move(next);
}

void advance_reference(Cloud& reference, const PotentialModel& model, double h,
                       const Cloud& noise) {
  if (reference.size() < 2) throw std::invalid_argument("reference ensemble needs M >= 2");
  step_particles(reference, model, h, noise);
}

void coupled_noise(const MixingFunctions& mix, std::span<const double> E,
                   std::span<const double> G, std::span<const double> G_sync,
                   std::span<double> noise_nonlinear, std::span<double> noise_particle) {
  const std::size_t d = E.size();
  const double r = norm(E);
  const double pr = mix.reflection_weight(r);
  const double ps = mix.synchronous_weight(r);
  // e = E/|E|, with e = 0 at E = 0 where pr vanishes anyway.
  double eG = 0.0;
  if (r > 0.0) {
    for (std::size_t k = 0; k < d; ++k) eG += E[k] * G[k];
    eG /= r;
  }
  for (std::size_t k = 0; k < d; ++k) {
    const double e = r > 0.0 ? E[k] / r : 0.0;
    noise_nonlinear[k] = pr * G[k] + ps * G_sync[k];
    noise_particle[k] = pr * (G[k] - 2.0 * e * eG) + ps * G_sync[k];
  }
}

CoupledEnsemble initialize_ensemble(const SimConfig& config, const PotentialModel& model,
                                    const NoiseSource& noise) {
  config.validate();
  if (model.dim() != config.dim) throw std::invalid_argument("model and config dimensions differ");
  const std::size_t n = config.N;
  const std::size_t d = config.dim;
  CoupledEnsemble ens;
  ens.h = config.h;
  ens.X_bar = Cloud(n, d);
  ens.X = Cloud(n, d);
  ens.E = Cloud(n, d);
  std::vector<double> z(d);
  const Channel particle_channel = config.coupling == InitialCoupling::kSynchronous
                                       ? Channel::kInitNonlinear
                                       : Channel::kInitParticle;
  for (std::size_t i = 0; i < n; ++i) {
    draw_initial(noise, Channel::kInitNonlinear, i, config.nu, z, ens.X_bar[i]);
    draw_initial(noise, particle_channel, i, config.mu, z, ens.X[i]);
    for (std::size_t k = 0; k < d; ++k) ens.E[i][k] = ens.X_bar[i][k] - ens.X[i][k];
  }
  if (config.allow_closure && model.has_linear_closure()) {
    ens.closure = LinearClosure{config.nu.mean, config.nu.coordinate_variance(),
                                *model.confinement_coefficient(), *model.interaction_coefficient()};
  } else {
    if (config.M < 2) throw std::invalid_argument("reference ensemble needs M >= 2");
    Cloud ref(config.M, d);
    for (std::size_t j = 0; j < config.M; ++j) {
      draw_initial(noise, Channel::kReference, j, config.nu, z, ref[j]);
    }
    ens.reference = std::move(ref);
  }
  return ens;
}

void step_coupled(CoupledEnsemble& ens, const PotentialModel& model, const MixingFunctions& mix,
                  const NoiseSource& noise) {
  const std::size_t n = ens.size();
  const std::size_t d = ens.dim();
  const double h = ens.h;
  const double amp = std::sqrt(2.0 * h);
  const std::uint64_t step = ens.step;

  std::vector<double> mean_X(d), ref_mean(d);
  mean_into(ens.X, mean_X);
  const Cloud* ref_cloud = nullptr;
  if (ens.closure) {
    std::copy(ens.closure->mean.begin(), ens.closure->mean.end(), ref_mean.begin());
  } else {
    ref_cloud = &*ens.reference;
    mean_into(*ref_cloud, ref_mean);
  }

  std::vector<double> G(d), Gs(d), nb(d), np(d), gv(d), gw(d), conv(d);
  Cloud next_bar(n, d);
  Cloud next_X(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    noise.gaussians(Channel::kReflected, step, i, std::span<double>(G));
    noise.gaussians(Channel::kSynchronous, step, i, std::span<double>(Gs));
    coupled_noise(mix, ens.E[i], G, Gs, nb, np);

    const auto xb = ens.X_bar[i];
    model.grad_V(xb, gv);
    if (ref_cloud != nullptr) {
      interaction_drift(model, *ref_cloud, ref_mean, xb, conv);
    } else {
      const double k = ens.closure->interaction;
      for (std::size_t c = 0; c < d; ++c) conv[c] = k * (xb[c] - ref_mean[c]);
    }
    auto yb = next_bar[i];
    for (std::size_t c = 0; c < d; ++c) yb[c] = xb[c] - h * (gv[c] + conv[c]) + amp * nb[c];

    const auto x = ens.X[i];
    model.grad_V(x, gv);
    interaction_drift(model, ens.X, mean_X, x, gw);
    auto y = next_X[i];
    for (std::size_t c = 0; c < d; ++c) y[c] = x[c] - h * (gv[c] + gw[c]) + amp * np[c];
  }

  const double t_next = static_cast<double>(step + 1) * h;
  check_finite(next_bar, t_next, "nonlinear");
  check_finite(next_X, t_next, "particle");

  if (ens.closure) {
    ens.closure->advance(h);
  } else {
    Cloud& ref = *ens.reference;
    Cloud ref_noise(ref.size(), d);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      noise.gaussians(Channel::kReference, step + 1, j, ref_noise[j]);
    }
    advance_reference(ref, model, h, ref_noise);
  }

  ens.X_bar = std::move(next_bar);
  ens.X = std::move(next_X);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) ens.E[i][c] = ens.X_bar[i][c] - ens.X[i][c];
  }
  ens.step = step + 1;
  ens.t = t_next;
}

SummaryRecord summarize(const CoupledEnsemble& ens, const PotentialModel& model,
                        const RateProfile& profile) {
  const std::size_t n = ens.size();
  const std::size_t d = ens.dim();
  SummaryRecord rec;
  rec.t = ens.t;
  double fsum = 0.0, esum = 0.0, mx = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = norm(ens.E[i]);
    fsum += profile.f(r);
    esum += r;
    mx += norm_sq(ens.X[i]);
    mb += norm_sq(ens.X_bar[i]);
  }
  const double inv = 1.0 / static_cast<double>(n);
  rec.mean_f_distance = fsum * inv;
  rec.mean_euclid_distance = esum * inv;
  rec.second_moment_particles = mx * inv;
  rec.second_moment_nonlinear = mb * inv;

  // Upsilon: |grad W * mu_ref (X_bar^i) - (1/N) sum_j grad W(X_bar^i - X_bar^j)|.
  std::vector<double> mean_bar(d), ref_mean(d), conv(d), emp(d);
  mean_into(ens.X_bar, mean_bar);
  if (ens.closure) {
    std::copy(ens.closure->mean.begin(), ens.closure->mean.end(), ref_mean.begin());
  } else {
    mean_into(*ens.reference, ref_mean);
  }
  if (auto k = model.interaction_coefficient()) {
    double dist = 0.0;
    for (std::size_t c = 0; c < d; ++c) dist += (mean_bar[c] - ref_mean[c]) * (mean_bar[c] - ref_mean[c]);
    rec.upsilon_estimate = std::abs(*k) * std::sqrt(dist);
  } else {
    double ups = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      interaction_drift(model, *ens.reference, ref_mean, ens.X_bar[i], conv);
      interaction_drift(model, ens.X_bar, mean_bar, ens.X_bar[i], emp);
      double q = 0.0;
      for (std::size_t c = 0; c < d; ++c) q += (conv[c] - emp[c]) * (conv[c] - emp[c]);
      ups += std::sqrt(q);
    }
    rec.upsilon_estimate = ups * inv;
  }
  return rec;
}

std::vector<SummaryRecord> run_coupled(const SimConfig& config, const PotentialModel& model,
                                       const RateProfile& profile, std::uint64_t replication) {
  const NoiseSource noise(config.seed, replication);
  CoupledEnsemble ens = initialize_ensemble(config, model, noise);
  const MixingFunctions mix = make_mixing(config.delta);

  std::vector<std::size_t> out_steps;
  out_steps.reserve(config.output_times.size());
  for (double t : config.output_times) {
    out_steps.push_back(static_cast<std::size_t>(std::llround(t / config.h)));
  }

  std::vector<SummaryRecord> records;
  records.reserve(out_steps.size());
  std::size_t next = 0;
  auto emit = [&] {
    while (next < out_steps.size() && out_steps[next] == ens.step) {
      SummaryRecord rec = summarize(ens, model, profile);
      rec.t = config.output_times[next];
      records.push_back(rec);
      ++next;
    }
  };
  emit();
  const std::size_t total = config.steps();
  while (ens.step < total) {
    try {
      step_coupled(ens, model, mix, noise);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("replication {}: {}", replication, e.what()));
    }
    emit();
  }
  return records;
}

}  // namespace mfchaos
