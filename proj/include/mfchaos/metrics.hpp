#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

#include "mfchaos/cloud.hpp"

namespace mfchaos {

enum class TransportMethod { kCoupledBound, kExact1d, kExactAssignment };

std::string_view to_string(TransportMethod method);

/// A distance estimate with its replication standard error.
struct TransportEstimate {
  double value = 0.0;
  double std_error = 0.0;
  TransportMethod method = TransportMethod::kCoupledBound;
  std::size_t n_samples = 0;
};

/// Cost as a function of Euclidean distance, e.g. the concave f or identity.
using DistanceCost = std::function<double(double)>;

/// (1/N) sum_i f(|E^i|): the cost of the constructed coupling, hence an upper
/// bound on W_{l1(f)} between the particle law and the product of nonlinear laws.
double coupled_distance(const Cloud& differences, const DistanceCost& f);

/// Exact W_f between two equal-size empirical measures on the line, for a
/// concave nondecreasing cost with f(0) = 0. Optimal matchings for such
/// costs can be taken non-crossing, so an interval dynamic program over the
/// merged sorted points is exact. O(n^3); n <= 1024.
double wasserstein_1d_exact(std::span<const double> a, std::span<const double> b,
                            const DistanceCost& f);

/// (1/n) sum_k f(|a_(k) - b_(k)|) over order statistics. Optimal for convex
/// costs such as the identity (W_1), not for strictly concave ones.
double wasserstein_1d_monotone(std::span<const double> a, std::span<const double> b,
                               const DistanceCost& f);

/// Exact W_f between empirical measures in any dimension via optimal
/// assignment on f(|a_i - b_j|). n <= 512.
double wasserstein_assignment(const Cloud& a, const Cloud& b, const DistanceCost& f);

/// (1/N) sum_i |x_i|^2.
double second_moment(const Cloud& state);

/// Mean and standard error of estimator(r) over replications
/// r = first, ..., first + R - 1. Each replication index selects a disjoint
/// random stream, so the result is reproducible for any thread count.
TransportEstimate replicate(const std::function<double(std::uint64_t)>& estimator, std::size_t R,
                            TransportMethod method, std::uint64_t first = 0,
                            unsigned threads = 1);

}  // namespace mfchaos
