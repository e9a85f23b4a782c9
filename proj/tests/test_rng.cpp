#include <cmath>
#include <set>

#include "doctest.h"
#include "mfchaos/philox.hpp"

using mfchaos::Channel;
using mfchaos::NoiseSource;
using mfchaos::Philox4x32;

// Known-answer vectors published with the Random123 reference implementation.
TEST_CASE("philox4x32-10 known answers") {
  CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) ==
        Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                             {0xffffffffu, 0xffffffffu}) ==
        Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                             {0xa4093822u, 0x299f31d0u}) ==
        Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("philox is usable at compile time") {
  constexpr auto w = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  static_assert(w[0] == 0x6627e8d5u);
}

TEST_CASE("uniforms lie strictly inside (0,1) and are addressable") {
  const NoiseSource a(42, 3);
  const NoiseSource b(42, 3);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto u = a.uniforms(Channel::kTest, i, i * 7, 0);
    CHECK(u[0] > 0.0);
    CHECK(u[0] < 1.0);
    CHECK(u[1] > 0.0);
    CHECK(u[1] < 1.0);
    CHECK(u == b.uniforms(Channel::kTest, i, i * 7, 0));
  }
}

TEST_CASE("streams differ across seed, replication, channel, step and index") {
  std::set<double> seen;
  seen.insert(NoiseSource(1, 0).uniforms(Channel::kTest, 0, 0, 0)[0]);
  seen.insert(NoiseSource(2, 0).uniforms(Channel::kTest, 0, 0, 0)[0]);
  seen.insert(NoiseSource(1ull << 33, 0).uniforms(Channel::kTest, 0, 0, 0)[0]);
  seen.insert(NoiseSource(1, 1).uniforms(Channel::kTest, 0, 0, 0)[0]);
  seen.insert(NoiseSource(1, 0).uniforms(Channel::kReflected, 0, 0, 0)[0]);
  seen.insert(NoiseSource(1, 0).uniforms(Channel::kTest, 1, 0, 0)[0]);
  seen.insert(NoiseSource(1, 0).uniforms(Channel::kTest, 0, 1, 0)[0]);
  seen.insert(NoiseSource(1, 0).uniforms(Channel::kTest, 0, 0, 1)[0]);
  CHECK(seen.size() == 8);
}

TEST_CASE("gaussian draws have unit variance and no odd-length artefact") {
  const NoiseSource src(7, 0);
  constexpr int kDraws = 100000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  std::array<double, 3> z{};
  for (int i = 0; i < kDraws; ++i) {
    src.gaussians(Channel::kTest, 0, static_cast<std::uint64_t>(i), z);
    for (double v : z) {
      s += v;
      s2 += v * v;
      s4 += v * v * v * v;
    }
  }
  const double n = 3.0 * kDraws;
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
}
