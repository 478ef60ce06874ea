#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace lstdac {

/// Seeded random stream with a portable uniform draw.
///
/// std::uniform_real_distribution is implementation-defined, so draws are
/// built directly from the top 53 bits of the engine output instead. The
/// same seed produces the same sequence on every conforming platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Index drawn from a probability vector by inverse CDF in ascending index
  /// order. Entries need not sum exactly to one; the last positive entry
  /// absorbs rounding slack.
  std::size_t categorical(std::span<const double> probs);

  std::uint64_t next_u64() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

/// Derives the seed of stream `index` from a base seed (splitmix64 mix of
/// base + index). Used for per-episode streams in Monte Carlo fan-out.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

} // namespace lstdac
