#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace eqprop {

// xoshiro256** generator. The whole state is 32 bytes, which is what the
// checkpoint format stores. Satisfies UniformRandomBitGenerator so it can
// drive <random> distributions, but the helpers below are used wherever
// results must be identical across standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  static Rng from_state(const State& state);

  // State is expanded from the seed with splitmix64.
  void reseed(std::uint64_t seed);
  const State& state() const { return state_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  bool coin() { return ((*this)() >> 63) != 0; }
  // Standard normal via Marsaglia's polar method.
  double normal();

 private:
  State state_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent stream seed from a base seed and a stream id.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace eqprop
