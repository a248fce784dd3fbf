#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace hqm {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Stateless: the output is a pure function of counter and key.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream. A stream is identified by (seed, stream_id);
/// draws from different streams never overlap and the n-th draw of a stream
/// does not depend on how any other stream was consumed. Netsim uses one
/// stream per trial so trial outcomes are independent of thread scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Satisfies UniformRandomBitGenerator.
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Uniform on the open interval (0, 1); safe to take the logarithm of.
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t binomial(std::uint64_t n, double p);
  /// Poisson variate by sequential inversion; intended for the small means of
  /// detector background (throws ParameterError above 700).
  std::uint64_t poisson(double mean);
  /// Number of failures before the first success with success probability
  /// 1 - ratio, i.e. P(n) = (1 - ratio) ratio^n.
  std::uint64_t geometric(double ratio);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t stream_id_ = 0;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int word_ = 4;
};

/// Stream for trial `trial_id` of a run seeded with `seed`.
inline RngStream trial_stream(std::uint64_t seed, std::uint64_t trial_id) {
  return RngStream(seed, trial_id);
}

}  // namespace hqm
