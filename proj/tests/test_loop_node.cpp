#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hqm/errors.hpp"
#include "hqm/loop_node.hpp"
#include "hqm/scenarios.hpp"

using namespace hqm;
using Catch::Approx;

namespace {

LoopParams chain_loop() { return LoopParams{TimeNs{20.3}, 0.95, TimeNs{5.0}, TimeNs{33.3}, 1.0}; }

}  // namespace

TEST_CASE("map in and slot collisions") {
  LoopState s(chain_loop());
  CHECK_NOTHROW(s.map_in(1, TimeNs{1234.5}));
  CHECK_NOTHROW(s.map_in(2, TimeNs{1244.5}));
  CHECK(s.occupants().size() == 2);
  CHECK(s.occupant(1).cycles_completed == 0);

  LoopState t(chain_loop());
  t.map_in(1, TimeNs{0});
  CHECK_THROWS_AS(t.map_in(2, TimeNs{3}), SchedulingError);
  // the same phase one period later is still a collision
  CHECK_THROWS_AS(t.map_in(3, TimeNs{20.3 + 2.0}), SchedulingError);
  CHECK_THROWS_AS(t.occupant(9), LookupError);
}

TEST_CASE("circulation losses") {
  LoopParams lossless = chain_loop();
  lossless.transmission_per_cycle = 1.0;
  LoopState a(lossless);
  RngStream rng(1, 0);
  a.map_in(1, TimeNs{0}, 1000);
  for (int i = 0; i < 50; ++i) a.circulate(rng);
  CHECK(a.occupant(1).count == 1000);
  CHECK(a.occupant(1).cycles_completed == 50);

  LoopParams l = scenarios::fig3_loop();
  const std::uint64_t n = 1000000;
  LoopState b(l);
  b.map_in(1, TimeNs{0}, n);
  b.circulate(rng);
  const double frac = static_cast<double>(b.occupant(1).count) / static_cast<double>(n);
  CHECK(std::fabs(frac - 0.9) < 3 * std::sqrt(0.09 / static_cast<double>(n)));

  double f9 = 0, f10 = 0;
  LoopState c(l);
  c.map_in(1, TimeNs{0}, n);
  for (int i = 1; i <= 10; ++i) {
    c.circulate(rng);
    if (i == 9) f9 = static_cast<double>(c.occupant(1).count) / static_cast<double>(n);
  }
  f10 = static_cast<double>(c.occupant(1).count) / static_cast<double>(n);
  CHECK(f9 > 1 / std::numbers::e);
  CHECK(f10 < 1 / std::numbers::e);
}

TEST_CASE("full map-out times and efficiency") {
  RngStream rng(2, 0);
  LoopState s(scenarios::fig3_loop());
  s.map_in(1, TimeNs{100}, 5);
  const Emission e0 = s.map_out_full(1, 0);
  CHECK(e0.count == 5);
  CHECK(e0.time == TimeNs{100});
  CHECK(s.empty());

  CHECK(grid_time(TimeNs{0}, 11, TimeNs{10.4}).value == Approx(114.4).margin(1e-9));
  CHECK(grid_time(TimeNs{0}, 3, TimeNs{20.3}).value == Approx(60.9).margin(1e-9));

  LoopState t(scenarios::fig3_loop());
  t.map_in(1, TimeNs{0});
  for (int i = 0; i < 11; ++i) t.circulate(rng);
  CHECK_THROWS(t.map_out_full(1, 10));
  const Emission e = t.map_out_full(1, 11);
  CHECK(e.time.value == Approx(114.4).margin(1e-9));
  CHECK_THROWS_AS(t.map_out_full(1, 11), LookupError);

  const std::uint64_t n = 1000000;
  for (std::int64_t k : {1, 5, 12}) {
    LoopState u(scenarios::fig3_loop());
    u.map_in(1, TimeNs{0}, n);
    for (std::int64_t i = 0; i < k; ++i) u.circulate(rng);
    const double eff = std::pow(0.9, static_cast<double>(k));
    const double got = static_cast<double>(u.map_out_full(1, k).count) / static_cast<double>(n);
    CHECK(std::fabs(got - eff) < 4 * std::sqrt(eff * (1 - eff) / static_cast<double>(n)));
  }
}

TEST_CASE("grid times do not drift") {
  const TimeNs tau{20.3};
  for (std::int64_t k = 0; k < 100000; k += 997) {
    const double t = grid_time(TimeNs{7.25}, k, tau).value;
    CHECK(t == 7.25 + static_cast<double>(k) * 20.3);
  }
}

TEST_CASE("out-coupling probability and its inverse") {
  CHECK(outcoupling_probability(1.0) == Approx(1.0));
  CHECK(outcoupling_probability(0.0) == 0.0);
  CHECK(outcoupling_probability(0.5) == Approx(0.5).epsilon(1e-14));
  const double q = outcoupling_probability(0.5);
  CHECK(1 - (1 - q) * (1 - q) >= 0.75 - 1e-12);
  for (double v = 0.0; v <= 1.0; v += 0.05) CHECK(voltage_for_probability(outcoupling_probability(v)) == Approx(v).margin(1e-9));
  CHECK_THROWS_AS(outcoupling_probability(1.2), ParameterError);
}

TEST_CASE("chop emission probabilities") {
  CHECK(chop_emission_probability(0.95, 0.4, 1) == Approx(0.38).epsilon(1e-12));
  CHECK(chop_emission_probability(0.95, 0.4, 2) == Approx(0.2166).epsilon(1e-12));
  CHECK(chop_emission_probability(0.95, 0.4, 1) / chop_emission_probability(0.95, 0.4, 2) == Approx(7.0 / 4.0).epsilon(0.01));
  CHECK(chop_emission_probability(0.9, 1.0, 1) == Approx(0.9));
  CHECK(chop_emission_probability(0.9, 1.0, 2) == 0.0);
  CHECK(chop_emission_probability(0.9, 0.0, 3) == 0.0);

  double total = 0;
  for (int m = 1; m < 2000; ++m) total += chop_emission_probability(1.0, 0.3, m);
  CHECK(total == Approx(1.0).epsilon(1e-12));
  total = 0;
  for (int m = 1; m < 2000; ++m) total += chop_emission_probability(0.95, 0.3, m);
  CHECK(total < 1.0);
}

TEST_CASE("chop out Monte Carlo histogram") {
  RngStream rng(3, 0);
  RngStream pick(3, 1);
  // 40 bins in total: expect about 0.1 of them beyond 3 sigma
  int beyond3 = 0;
  for (int draw = 0; draw < 4; ++draw) {
    LoopParams l = chain_loop();
    l.transmission_per_cycle = draw == 0 ? 0.95 : 0.8 + 0.2 * pick.uniform();
    const double q = draw == 0 ? 0.4 : 0.1 + 0.8 * pick.uniform();
    const std::uint64_t n = 1000000;
    LoopState s(l);
    s.map_in(1, TimeNs{50}, n);
    const auto em = s.chop_out(1, voltage_for_probability(q), rng, 10);
    CHECK(s.empty());
    std::vector<double> counts(11, 0);
    for (const auto& e : em) {
      REQUIRE(e.round >= 1);
      REQUIRE(e.round <= 10);
      REQUIRE(e.time.value == Approx(50 + 20.3 * static_cast<double>(e.round)).margin(1e-9));
      counts[static_cast<std::size_t>(e.round)] += static_cast<double>(e.count);
    }
    for (int m = 1; m <= 10; ++m) {
      const double p = chop_emission_probability(l.transmission_per_cycle, q, m);
      const double sd = std::sqrt(static_cast<double>(n) * p * (1 - p));
      const double dev = std::fabs(counts[m] - static_cast<double>(n) * p);
      CHECK(dev <= 4 * sd + 1e-9);
      beyond3 += dev > 3 * sd + 1e-9;
    }
  }
  CHECK(beyond3 <= 1);

  LoopState z(chain_loop());
  z.map_in(1, TimeNs{0}, 1000);
  CHECK(z.chop_out(1, 0.0, rng, 50).empty());
}

TEST_CASE("partial out-coupling keeps the rest circulating") {
  RngStream rng(4, 0);
  LoopState s(chain_loop());
  s.map_in(1, TimeNs{0}, 100000);
  s.circulate(rng);
  const auto before = s.occupant(1).count;
  const Emission e = s.partial_out(1, 0.5, rng);
  CHECK(e.count + s.occupant(1).count == before);
  CHECK(std::fabs(static_cast<double>(e.count) / static_cast<double>(before) - 0.5) < 0.01);
}

TEST_CASE("switch schedule validation") {
  const LoopParams l = chain_loop();
  using K = SwitchKind;
  CHECK(validate_sequence({{TimeNs{0}, K::MapIn, 1, 1.0}}, l).empty());

  const auto close = validate_sequence({{TimeNs{0}, K::MapIn, 1, 1.0}, {TimeNs{4}, K::MapIn, 2, 1.0}}, l);
  REQUIRE_FALSE(close.empty());
  CHECK(close.front().kind == ViolationKind::RiseTime);

  const auto unsorted = validate_sequence({{TimeNs{10}, K::MapIn, 1, 1.0}, {TimeNs{0}, K::MapIn, 2, 1.0}}, l);
  REQUIRE_FALSE(unsorted.empty());
  CHECK(unsorted.front().kind == ViolationKind::Unsorted);

  const auto orphan = validate_sequence({{TimeNs{0}, K::MapOutFull, 3, 1.0}}, l);
  REQUIRE_FALSE(orphan.empty());
  CHECK(orphan.front().kind == ViolationKind::Structure);

  // two map-outs of the same slot one period apart are closer than the 33.3 ns spacing
  const auto spacing = validate_sequence(
      {{TimeNs{0}, K::MapIn, 1, 1.0}, {TimeNs{20.3}, K::MapOutPartial, 1, 0.5}, {TimeNs{40.6}, K::MapOutPartial, 1, 0.5}},
      l);
  REQUIRE_FALSE(spacing.empty());
  CHECK(spacing.front().kind == ViolationKind::MinSpacing);

  // FIFO: AS1 at 0, AS2 10 ns later, both out after one cycle
  CHECK(validate_sequence({{TimeNs{0}, K::MapIn, 1, 1.0},
                           {TimeNs{10}, K::MapIn, 2, 1.0},
                           {TimeNs{20.3}, K::MapOutFull, 1, 1.0},
                           {TimeNs{30.3}, K::MapOutFull, 2, 1.0}},
                          l)
            .empty());
}

TEST_CASE("phase distance on the circulation grid") {
  CHECK(phase_distance(TimeNs{0}, TimeNs{10}, TimeNs{20.3}) == Approx(10.0));
  CHECK(phase_distance(TimeNs{0}, TimeNs{19.3}, TimeNs{20.3}) == Approx(1.0));
  CHECK(phase_distance(TimeNs{5}, TimeNs{5 + 3 * 20.3}, TimeNs{20.3}) == Approx(0.0).margin(1e-9));
}
