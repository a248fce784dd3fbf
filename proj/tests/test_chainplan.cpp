#include <catch_amalgamated.hpp>

#include <cmath>

#include "hqm/chainplan.hpp"
#include "hqm/errors.hpp"
#include "hqm/scenarios.hpp"

using namespace hqm;
using Catch::Approx;

namespace {

ChainRequest request(ChainOp op, double t3, double t4) {
  ChainRequest r;
  r.operation = op;
  r.target_t3 = TimeNs{t3};
  r.target_t4 = TimeNs{t4};
  return r;
}

bool on_grid(const ChainPlan& p) {
  const double n = (p.achieved_t4.value - p.achieved_t3.value) / p.loop.period_tau.value;
  return std::fabs(n - std::round(n)) < 1e-9 && std::llround(n) == p.k2 - p.k1;
}

}  // namespace

TEST_CASE("FIFO keeps the order") {
  const ChainPlan p = scenarios::chain_plan(request(ChainOp::Fifo, 10, 10));
  CHECK(p.k2 - p.k1 == 0);
  CHECK(p.achieved_t3.value == Approx(10).margin(1e-9));
  CHECK(p.achieved_t4.value == Approx(10).margin(1e-9));
  CHECK(p.residual.value == Approx(0).margin(1e-9));
  CHECK(validate_sequence(p.events, p.loop).empty());
}

TEST_CASE("FILO reverses the order by one cycle") {
  const ChainPlan p = scenarios::chain_plan(request(ChainOp::Filo, 10, -10));
  CHECK(p.k2 - p.k1 == -1);
  CHECK(p.achieved_t4.value == Approx(-10.3).margin(1e-9));
  CHECK(p.residual.value == Approx(0.3).margin(1e-9));
  CHECK(on_grid(p));
}

TEST_CASE("Split stretches by three cycles") {
  const ChainPlan p = scenarios::chain_plan(request(ChainOp::Split, 30, 90));
  CHECK(p.k2 - p.k1 == 3);
  CHECK(p.achieved_t4.value == Approx(90.9).margin(1e-9));
  CHECK(p.residual.value == Approx(-0.9).margin(1e-9));
  CHECK(std::fabs(p.residual.value) <= p.loop.period_tau.value / 2);
  CHECK(on_grid(p));
}

TEST_CASE("planner errors are distinct") {
  CHECK_THROWS_AS(scenarios::chain_plan(request(ChainOp::Fifo, 10, -10)), UnreachableOrdering);
  CHECK_THROWS_AS(scenarios::chain_plan(request(ChainOp::Filo, 10, 10)), UnreachableOrdering);
  CHECK_THROWS_AS(scenarios::chain_plan(request(ChainOp::Fifo, 3, 3)), SlotCollision);
  CHECK_THROWS_AS(scenarios::chain_plan(request(ChainOp::Chop, 10, 10)), ParameterError);
  CHECK(chain_op_from_string("chop-fifo") == ChainOp::ChopFifo);
  CHECK_THROWS_AS(chain_op_from_string("LIFO"), ParameterError);
}

TEST_CASE("fine tuning moves the source-side interval") {
  const ChainPlan split = scenarios::chain_plan(request(ChainOp::Split, 30, 90));
  const ChainPlan up = fine_tune(split, TimeNs{2});
  CHECK(up.t2.value == Approx(2510.5).margin(1e-9));
  CHECK(up.achieved_t3.value == Approx(32).margin(1e-9));
  CHECK(up.achieved_t4.value == Approx(92.9).margin(1e-9));
  CHECK(up.k1 == split.k1);
  CHECK(up.k2 == split.k2);
  const ChainPlan down = fine_tune(split, TimeNs{-2});
  CHECK(down.achieved_t3.value == Approx(28).margin(1e-9));
  CHECK(down.achieved_t4.value == Approx(88.9).margin(1e-9));

  CHECK(fine_tune(split, TimeNs{0}) == split);
  CHECK(fine_tune(fine_tune(split, TimeNs{4}), TimeNs{-4}) == split);
  CHECK_THROWS_AS(fine_tune(split, TimeNs{3}), QuantizationError);
}

TEST_CASE("chop plans") {
  ChainRequest r = request(ChainOp::Chop, 10, 10);
  r.target_t5 = TimeNs{20};
  r.chop_ratio = std::pair{1.0, 3.0};
  const ChainPlan p = scenarios::chain_plan(r);
  REQUIRE(p.achieved_t5);
  CHECK(std::fabs(p.achieved_t5->value - 20) <= 1.0);
  CHECK(p.chop_gap >= 1);
  CHECK(p.chop_q > 0);
  CHECK(p.chop_q < 1);
  // first part : second part = q : T^j (1 - q)
  const double T = p.loop.transmission_per_cycle;
  CHECK(p.chop_q / (std::pow(T, static_cast<double>(p.chop_gap)) * (1 - p.chop_q)) == Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(validate_sequence(p.events, p.loop).empty());
}

TEST_CASE("reference rows plan within 1 ns") {
  REQUIRE(table1_rows().size() == 12);
  for (const auto& row : table1_rows()) {
    INFO(row.name);
    const ChainPlan p = scenarios::chain_plan(row.request);
    CHECK(std::fabs(p.achieved_t3.value - row.t3.value) <= 1.0);
    CHECK(std::fabs(p.achieved_t4.value - row.t4.value) <= 1.0);
    CHECK(p.t2.value == Approx(row.t2.value).margin(1e-9));
    if (row.t5) {
      REQUIRE(p.achieved_t5);
      CHECK(std::fabs(p.achieved_t5->value - row.t5->value) <= 1.0);
    }
    CHECK(validate_sequence(p.events, p.loop).empty());
    CHECK(on_grid(p));
  }
}

TEST_CASE("outcome predictions") {
  const ChainPlan fifo = scenarios::chain_plan(request(ChainOp::Fifo, 10, 10));
  const auto pred = predict_outcomes(fifo, scenarios::chain_ford(), scenarios::chain_loop(), scenarios::chain_link());
  const double g11 = pred.pair(1, "AS1").g2;
  const double g22 = pred.pair(2, "AS2").g2;
  CHECK(g11 >= 7);
  CHECK(g11 <= 9.5);
  CHECK(g22 >= 7);
  CHECK(g22 <= 9.5);
  CHECK(pred.pair(1, "AS2").g2 == Approx(1.0).margin(1e-12));
  CHECK(pred.pair(2, "AS1").g2 == Approx(1.0).margin(1e-12));
  CHECK_THROWS_AS(pred.pair(3, "AS1"), LookupError);

  // every cross-herald pair is independent for every row
  for (const auto& row : table1_rows()) {
    const ChainPlan p = scenarios::chain_plan(row.request);
    const auto pr = predict_outcomes(p, scenarios::chain_ford(), scenarios::chain_loop(), scenarios::chain_link());
    for (const auto& pp : pr.pairs)
      if ((pp.herald == 1) != (pp.mode.rfind("AS1", 0) == 0)) CHECK(pp.g2 == Approx(1.0).margin(1e-12));
  }

  // lossless, noiseless plan: every mode is emitted with certainty
  FordParams ideal;
  ideal.chi = 0.01;
  ideal.decay = {DecayForm::RationalQuadratic, 0, 0, 1};
  LoopParams loop = scenarios::chain_loop();
  loop.transmission_per_cycle = 1.0;
  const ChainPlan q = plan(request(ChainOp::Fifo, 10, 10), loop, ideal, ChannelParams{500, 2e8, 1.0},
                           scenarios::chain_constants());
  const auto ip = predict_outcomes(q, ideal, loop, ChannelParams{0, 2e8, 1.0});
  for (const auto& m : ip.modes) CHECK(m.emission_probability == Approx(1.0).epsilon(1e-12));

  // chop 1:3: the two parts of AS2 carry 1:3 of the photon after loss weighting
  ChainRequest r = request(ChainOp::Chop, 10, 10);
  r.target_t5 = TimeNs{20};
  r.chop_ratio = std::pair{1.0, 3.0};
  const ChainPlan c = scenarios::chain_plan(r);
  const auto cp = predict_outcomes(c, scenarios::chain_ford(), scenarios::chain_loop(), scenarios::chain_link());
  double p1 = 0, p2 = 0;
  for (const auto& m : cp.modes) {
    if (m.label == "AS2") p1 = m.emission_probability;
    if (m.label == "AS2'") p2 = m.emission_probability;
  }
  REQUIRE(p2 > 0);
  CHECK(p1 / p2 == Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("feedback click statistics reduce to the single-attempt model") {
  const double chi = 0.02, eta_s = 0.3, bg_s = 1e-4, eta = 0.1, bg_as = 1e-4;
  const auto one = feedback_click_probs(chi, eta_s, bg_s, {eta}, bg_as);
  const auto ref = click_probs_for_efficiency(chi, eta_s, bg_s, eta, bg_as);
  CHECK(one.p_stokes == Approx(ref.p_stokes).margin(1e-12));
  CHECK(one.p_coinc == Approx(ref.p_coinc).margin(1e-12));
  const auto ten = feedback_click_probs(chi, eta_s, bg_s, std::vector<double>(10, eta), bg_as);
  const double p1 = single_attempt_click_probability(chi, eta_s, bg_s);
  CHECK(ten.p_stokes == Approx(1 - std::pow(1 - p1, 10)).margin(1e-12));
}
