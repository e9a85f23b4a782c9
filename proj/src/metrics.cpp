#include "mfchaos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mfchaos/assignment.hpp"
#include "mfchaos/parallel.hpp"

namespace mfchaos {

std::string_view to_string(TransportMethod method) {
  switch (method) {
    case TransportMethod::kCoupledBound:
      return "coupled-bound";
    case TransportMethod::kExact1d:
      return "exact-1d";
    case TransportMethod::kExactAssignment:
      return "exact-assignment";
  }
  return "unknown";
}

double coupled_distance(const Cloud& differences, const DistanceCost& f) {
  if (differences.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < differences.size(); ++i) s += f(norm(differences[i]));
  return s / static_cast<double>(differences.size());
}

double wasserstein_1d_exact(std::span<const double> a, std::span<const double> b,
                            const DistanceCost& f) {
  if (a.size() != b.size()) throw std::invalid_argument("1D transport needs equal sample counts");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  if (n > 1024) throw std::invalid_argument("1D exact transport limited to n <= 1024");

  struct Point {
    double x;
    int side;  // +1 from a, -1 from b
  };
  std::vector<Point> pts;
  pts.reserve(2 * n);
  for (double x : a) pts.push_back({x, +1});
  for (double x : b) pts.push_back({x, -1});
  std::sort(pts.begin(), pts.end(),
            [](const Point& p, const Point& q) { return p.x < q.x || (p.x == q.x && p.side > q.side); });

  const std::size_t L = pts.size();
  std::vector<int> prefix(L + 1, 0);
  for (std::size_t i = 0; i < L; ++i) prefix[i + 1] = prefix[i] + pts[i].side;

  std::vector<double> pair_cost(L * L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t k = i + 1; k < L; ++k) {
      if (pts[i].side != pts[k].side) pair_cost[i * L + k] = f(pts[k].x - pts[i].x);
    }
  }

  // best[i * (L+1) + j]: optimal non-crossing matching of the half-open run [i, j).
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t W = L + 1;
  std::vector<double> best(W * W, kInf);
  for (std::size_t i = 0; i <= L; ++i) best[i * W + i] = 0.0;
  for (std::size_t len = 2; len <= L; len += 2) {
    for (std::size_t i = 0; i + len <= L; ++i) {
      const std::size_t j = i + len;
      if (prefix[j] != prefix[i]) continue;
      double v = kInf;
      // i is matched to k; (i, k) must enclose a balanced run.
      for (std::size_t k = i + 1; k < j; k += 2) {
        if (pts[k].side == pts[i].side || prefix[k] != prefix[i + 1]) continue;
        const double cand = pair_cost[i * L + k] + best[(i + 1) * W + k] + best[(k + 1) * W + j];
        v = std::min(v, cand);
      }
      best[i * W + j] = v;
    }
  }
  return best[L] / static_cast<double>(n);
}

double wasserstein_1d_monotone(std::span<const double> a, std::span<const double> b,
                               const DistanceCost& f) {
  if (a.size() != b.size()) throw std::invalid_argument("1D transport needs equal sample counts");
  if (a.empty()) return 0.0;
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t k = 0; k < sa.size(); ++k) s += f(std::abs(sa[k] - sb[k]));
  return s / static_cast<double>(sa.size());
}

double wasserstein_assignment(const Cloud& a, const Cloud& b, const DistanceCost& f) {
  if (a.size() != b.size() || a.dim() != b.dim()) {
    throw std::invalid_argument("assignment transport needs clouds of equal shape");
  }
  const std::size_t n = a.size();
  if (n > 512) throw std::invalid_argument("assignment transport limited to n <= 512");
  if (n == 0) return 0.0;
  std::vector<double> cost(n * n);
  std::vector<double> diff(a.dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < a.dim(); ++k) diff[k] = a[i][k] - b[j][k];
      cost[i * n + j] = f(norm(diff));
    }
  }
  return solve_assignment(cost, n).total_cost / static_cast<double>(n);
}

double second_moment(const Cloud& state) {
  if (state.empty()) throw std::invalid_argument("second moment of an empty ensemble");
  double s = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) s += norm_sq(state[i]);
  return s / static_cast<double>(state.size());
}

TransportEstimate replicate(const std::function<double(std::uint64_t)>& estimator, std::size_t R,
                            TransportMethod method, std::uint64_t first, unsigned threads) {
  if (R < 2) throw std::invalid_argument("replicate needs R >= 2");
  std::vector<double> values(R);
  parallel_for(R, threads, [&](std::size_t r) { values[r] = estimator(first + r); });
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(R);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(R - 1));
  return {mean, sd / std::sqrt(static_cast<double>(R)), method, R};
}

}  // namespace mfchaos
