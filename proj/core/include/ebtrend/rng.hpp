#pragma once

#include <cstdint>
#include <limits>

namespace ebtrend {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: output k of stream (key, stream) is a pure
/// function of (key, stream, k), so any unit's draws can be produced without
/// touching the others. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t key, std::uint64_t stream) noexcept
      : base_(splitmix64(splitmix64(key) ^ (stream * 0xd1342543de82ef95ULL + 1))) {}

  result_type operator()() noexcept { return splitmix64(base_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Skip ahead by `steps` outputs.
  void discard(std::uint64_t steps) noexcept { counter_ += steps; }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace ebtrend
