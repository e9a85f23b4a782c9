#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mfchaos {

/// Philox-4x32-10 counter-based generator (Salmon et al., SC'11).
/// A pure function of (counter, key): any draw can be recomputed from its
/// index alone, which is what makes runs independent of thread scheduling.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Noise channels. Each channel is a disjoint region of the counter space.
enum class Channel : std::uint32_t {
  kReflected = 0,    // B^i, reflected for the particle component
  kSynchronous = 1,  // B~^i, shared by both components
  kReference = 2,    // reference ensemble approximating the nonlinear law
  kInitNonlinear = 3,
  kInitParticle = 4,
  kBootstrap = 5,
  kValidation = 6,
  kTest = 7,
};

/// Addressable Gaussian/uniform source for one (seed, replication) pair.
/// Draw (step, index, channel, coord) is a deterministic function of its address.
class NoiseSource {
 public:
  NoiseSource(std::uint64_t seed, std::uint64_t replication)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        replication_(static_cast<std::uint32_t>(replication)) {}

  /// Two independent uniforms in (0,1) with 53-bit resolution for block `block`.
  std::array<double, 2> uniforms(Channel ch, std::uint64_t step, std::uint64_t index,
                                 std::uint32_t block) const {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step),
                                  static_cast<std::uint32_t>(index), replication_,
                                  (static_cast<std::uint32_t>(ch) << 24) | (block & 0xFFFFFFu)};
    const auto w = Philox4x32::generate(ctr, key_);
    return {to_open_unit(w[0], w[1]), to_open_unit(w[2], w[3])};
  }

  /// Fill `out` with standard normal draws for (channel, step, index).
  template <typename Span>
  void gaussians(Channel ch, std::uint64_t step, std::uint64_t index, Span&& out) const {
    const std::size_t n = out.size();
    for (std::size_t k = 0; k < n; k += 2) {
      const auto u = uniforms(ch, step, index, static_cast<std::uint32_t>(k / 2));
      const double radius = std::sqrt(-2.0 * std::log(u[0]));
      const double angle = 2.0 * std::numbers::pi * u[1];
      out[k] = radius * std::cos(angle);
      if (k + 1 < n) out[k + 1] = radius * std::sin(angle);
    }
  }

 private:
  static double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  Philox4x32::Key key_;
  std::uint32_t replication_;
};

}  // namespace mfchaos
