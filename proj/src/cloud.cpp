#include "mfchaos/cloud.hpp"

#include <cmath>

namespace mfchaos {

double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

void mean_into(const Cloud& c, std::span<double> out) {
  for (auto& v : out) v = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto p = c[i];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += p[k];
  }
  const double inv = c.empty() ? 0.0 : 1.0 / static_cast<double>(c.size());
  for (auto& v : out) v *= inv;
}

}  // namespace mfchaos
