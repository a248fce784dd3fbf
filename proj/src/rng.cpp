#include "hqm/rng.hpp"

#include <random>

#include "hqm/errors.hpp"

namespace hqm {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_id_(stream_id) {}

void RngStream::refill() {
  block_ = philox4x32_10({static_cast<std::uint32_t>(block_index_),
                          static_cast<std::uint32_t>(block_index_ >> 32),
                          static_cast<std::uint32_t>(stream_id_),
                          static_cast<std::uint32_t>(stream_id_ >> 32)},
                         key_);
  ++block_index_;
  word_ = 0;
}

std::uint64_t RngStream::next_u64() {
  if (word_ >= 4) refill();
  const std::uint64_t v =
      (static_cast<std::uint64_t>(block_[word_]) << 32) | block_[word_ + 1];
  word_ += 2;
  return v;
}

std::uint64_t RngStream::binomial(std::uint64_t n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("binomial p must lie in [0, 1]");
  if (p == 0.0 || n == 0) return 0;
  if (p == 1.0) return n;
  if (n > 64) return std::binomial_distribution<std::uint64_t>(n, p)(*this);
  std::uint64_t k = 0;
  for (std::uint64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
  return k;
}

std::uint64_t RngStream::poisson(double mean) {
  if (!(mean >= 0.0)) throw ParameterError("poisson mean must be non-negative");
  if (mean == 0.0) return 0;
  if (mean > 700.0) throw ParameterError("poisson mean too large for inversion sampler");
  const double u = uniform();
  double term = std::exp(-mean);
  double cdf = term;
  std::uint64_t k = 0;
  while (u >= cdf) {
    ++k;
    term *= mean / static_cast<double>(k);
    const double next = cdf + term;
    if (next == cdf) break;  // tail below double resolution
    cdf = next;
  }
  return k;
}

std::uint64_t RngStream::geometric(double ratio) {
  if (ratio <= 0.0) return 0;
  if (ratio >= 1.0) throw ParameterError("geometric ratio must be < 1");
  const double n = std::floor(std::log(uniform_open()) / std::log(ratio));
  return static_cast<std::uint64_t>(n);
}

}  // namespace hqm
