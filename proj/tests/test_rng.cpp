#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "hqm/errors.hpp"
#include "hqm/rng.hpp"

using hqm::RngStream;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A = std::array<std::uint32_t, 4>;
  CHECK(hqm::philox4x32_10(A{0, 0, 0, 0}, {0, 0}) == A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(hqm::philox4x32_10(A{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(hqm::philox4x32_10(A{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::set<std::uint64_t> firsts;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    firsts.insert(x);
  }
  CHECK(firsts.size() == 100);
  RngStream a2(42, 7);
  CHECK(a2.next_u64() != c.next_u64());
  RngStream a3(42, 7);
  CHECK(a3.next_u64() != d.next_u64());
  CHECK(hqm::trial_stream(42, 7).next_u64() == RngStream(42, 7).next_u64());
}

TEST_CASE("uniform draws lie in range with the right moments") {
  RngStream r(1, 0);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double v = r.uniform_open();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  CHECK(std::fabs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::fabs(sum2 / n - mean * mean - 1.0 / 12.0) < 2e-3);
}

TEST_CASE("binomial variates match mean and variance") {
  RngStream r(3, 1);
  CHECK(r.binomial(0, 0.5) == 0);
  CHECK(r.binomial(100, 0.0) == 0);
  CHECK(r.binomial(100, 1.0) == 100);
  for (auto [n, p] : {std::pair<std::uint64_t, double>{10, 0.3}, {1000000, 0.9}, {50, 0.02}}) {
    const int m = 20000;
    double s = 0, s2 = 0;
    for (int i = 0; i < m; ++i) {
      const double x = static_cast<double>(r.binomial(n, p));
      REQUIRE(x <= static_cast<double>(n));
      s += x;
      s2 += x * x;
    }
    const double mean = s / m;
    const double var = s2 / m - mean * mean;
    const double true_var = static_cast<double>(n) * p * (1 - p);
    CHECK(std::fabs(mean - static_cast<double>(n) * p) < 5.0 * std::sqrt(true_var / m));
    CHECK(var == Catch::Approx(true_var).epsilon(0.05));
  }
  CHECK_THROWS_AS(r.binomial(5, 1.5), hqm::ParameterError);
}

TEST_CASE("poisson and geometric variates") {
  RngStream r(5, 2);
  CHECK(r.poisson(0.0) == 0);
  const int m = 200000;
  double s = 0;
  int zeros = 0;
  for (int i = 0; i < m; ++i) {
    const auto x = r.poisson(0.3);
    s += static_cast<double>(x);
    zeros += x == 0;
  }
  CHECK(std::fabs(s / m - 0.3) < 5.0 * std::sqrt(0.3 / m));
  const double p0 = std::exp(-0.3);
  CHECK(std::fabs(zeros / double(m) - p0) < 5.0 * std::sqrt(p0 * (1 - p0) / m));
  CHECK_THROWS_AS(r.poisson(-1.0), hqm::ParameterError);

  // P(n) = (1 - q) q^n
  const double q = 0.25;
  std::array<int, 3> counts{};
  for (int i = 0; i < m; ++i) {
    const auto x = r.geometric(q);
    if (x < 3) ++counts[x];
  }
  for (int n = 0; n < 3; ++n) {
    const double p = (1 - q) * std::pow(q, n);
    CHECK(std::fabs(counts[n] / double(m) - p) < 5.0 * std::sqrt(p * (1 - p) / m));
  }
}
