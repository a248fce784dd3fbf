#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hqm/errors.hpp"
#include "hqm/phys_model.hpp"
#include "hqm/rng.hpp"
#include "hqm/scenarios.hpp"

using namespace hqm;
using Catch::Approx;

namespace {

// Brute-force joint click probabilities with an independent truncation. The
// read pulse only follows a Stokes click.
ClickProbabilities brute_force(double chi, double eta_s, double bg_s, double eta_as, double bg_as) {
  double no_s = 0, s_no_as = 0;
  for (int n = 0; n < 400; ++n) {
    const double p = std::pow(chi, n) / std::pow(1 + chi, n + 1);
    const double miss_s = std::exp(-bg_s) * std::pow(1 - eta_s, n);
    no_s += p * miss_s;
    s_no_as += p * (1 - miss_s) * std::exp(-bg_as) * std::pow(1 - eta_as, n);
  }
  ClickProbabilities c;
  c.p_stokes = 1 - no_s;
  c.p_as = 1 - no_s * std::exp(-bg_as) - s_no_as;
  c.p_coinc = c.p_stokes - s_no_as;
  return c;
}

FordParams simple_ford(double chi, double eta_s, double eta_as, double bg_s, double bg_as) {
  FordParams f;
  f.chi = chi;
  f.eta_stokes = eta_s;
  f.eta_as = eta_as;
  f.eta_ret0 = 1.0;
  f.decay = {DecayForm::RationalQuadratic, 0.0, 0.0, 1.0};
  f.bg_stokes = bg_s;
  f.bg_as = bg_as;
  return f;
}

}  // namespace

TEST_CASE("thermal sampler") {
  RngStream rng(11, 0);
  for (int i = 0; i < 1000; ++i) REQUIRE(sample_excitation_number(0.0, rng) == 0);
  CHECK_THROWS_AS(sample_excitation_number(1.0, rng), ParameterError);
  CHECK_THROWS_AS(sample_excitation_number(-0.1, rng), ParameterError);

  const double chi = 0.05;
  const int n = 1000000;
  double sum = 0;
  std::array<int, 4> hist{};
  for (int i = 0; i < n; ++i) {
    const auto k = sample_excitation_number(chi, rng);
    sum += static_cast<double>(k);
    if (k < 4) ++hist[k];
  }
  CHECK(std::fabs(sum / n - chi) < 3.0 * std::sqrt(chi * (1 + chi) / n));
  for (int k = 0; k < 4; ++k) {
    const double p = std::pow(chi, k) / std::pow(1 + chi, k + 1);
    CHECK(std::fabs(hist[k] / double(n) - p) <= 4.0 * std::sqrt(p * (1 - p) / n) + 1.0 / n);
  }
}

TEST_CASE("thermal pmf values") {
  CHECK(thermal_pmf(0.5, 0) == Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(thermal_pmf(0.5, 1) == Approx(2.0 / 9.0).epsilon(1e-14));
  CHECK(thermal_pmf(0.0, 0) == 1.0);
  CHECK(thermal_pmf(0.0, 3) == 0.0);
  const auto nmax = thermal_truncation(0.05);
  CHECK(nmax <= 64);
  CHECK(std::pow(0.05 / 1.05, static_cast<double>(nmax) + 1) < 1e-12);
}

TEST_CASE("analytic click probabilities") {
  const LoopParams loop{};
  const ChannelParams ch{0.0, 2e8, 1.0};

  SECTION("no source, no noise") {
    const auto p = analytic_click_probs(simple_ford(0.0, 0.5, 0.5, 0, 0), TimeNs{0}, 0, loop, ch);
    CHECK(p.p_stokes == 0.0);
    CHECK(p.p_as == 0.0);
    CHECK(p.p_coinc == 0.0);
  }
  SECTION("perfect efficiencies collapse to P(n >= 1)") {
    const auto p = analytic_click_probs(simple_ford(0.05, 1, 1, 0, 0), TimeNs{0}, 0, loop, ch);
    CHECK(p.p_coinc == Approx(1 - 1 / 1.05).margin(1e-12));
    CHECK(p.p_stokes == Approx(1 - 1 / 1.05).margin(1e-12));
  }
  SECTION("matches a brute-force joint sum") {
    for (double chi : {0.001, 0.02, 0.3}) {
      const auto f = simple_ford(chi, 0.3, 0.124, 1e-4, 1e-4);
      const auto p = analytic_click_probs(f, TimeNs{0}, 0, loop, ch);
      const auto o = brute_force(chi, 0.3, 1e-4, 0.124, 1e-4);
      CHECK(p.p_stokes == Approx(o.p_stokes).margin(1e-11));
      CHECK(p.p_as == Approx(o.p_as).margin(1e-11));
      CHECK(p.p_coinc == Approx(o.p_coinc).margin(1e-11));
    }
  }
  SECTION("path efficiency composes retrieval, channel and loop") {
    FordParams f = simple_ford(0.02, 0.3, 0.5, 0, 0);
    f.eta_ret0 = 0.6;
    f.decay = {DecayForm::RationalQuadratic, 1e-3, 1e-6, 1.0};
    LoopParams l;
    l.transmission_per_cycle = 0.9;
    const ChannelParams c{0.0, 2e8, 0.8};
    const double eta = anti_stokes_path_efficiency(f, TimeNs{100}, 4, l, c);
    CHECK(eta == Approx(0.5 * 0.6 / (1 + 0.1 + 0.01) * 0.8 * std::pow(0.9, 4)).epsilon(1e-12));
    const auto p = analytic_click_probs(f, TimeNs{100}, 4, l, c);
    const auto o = brute_force(0.02, 0.3, 0, eta, 0);
    CHECK(p.p_coinc == Approx(o.p_coinc).epsilon(1e-9));
  }
  SECTION("outputs are probabilities with coincidences bounded by singles") {
    RngStream r(9, 9);
    for (int i = 0; i < 200; ++i) {
      const auto f = simple_ford(0.5 * r.uniform(), r.uniform(), r.uniform(), 0.01 * r.uniform(), 0.01 * r.uniform());
      const auto p = analytic_click_probs(f, TimeNs{0}, 0, loop, ch);
      REQUIRE(p.p_stokes >= 0);
      REQUIRE(p.p_stokes <= 1);
      REQUIRE(p.p_as <= 1);
      REQUIRE(p.p_coinc >= 0);
      REQUIRE(p.p_coinc <= std::min(p.p_stokes, p.p_as) + 1e-15);
    }
  }
}

TEST_CASE("g2 from click probabilities") {
  CHECK(g2_analytic({0.1, 0.2, 0.02}) == Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(g2_analytic({0.0, 0.2, 0.0}), UndefinedEstimate);
  CHECK_THROWS_AS(g2_analytic({0.1, 0.0, 0.0}), UndefinedEstimate);
  // lossless, noiseless pairs: g2 = P(n>=1) / P(n>=1)^2 = (1 + chi)/chi
  const auto p = analytic_click_probs(simple_ford(0.01, 1, 1, 0, 0), TimeNs{0}, 0, LoopParams{}, {0, 2e8, 1});
  CHECK(g2_analytic(p) > 50.0);
  CHECK(g2_analytic(p) == Approx(101.0).epsilon(1e-9));
}

TEST_CASE("retrieval efficiency curves") {
  const DecayFitParams none{DecayForm::RationalQuadratic, 0, 0, 1};
  for (double t : {0.0, 100.0, 5000.0}) CHECK(ford_retrieval_efficiency(TimeNs{t}, 1.0, none) == 1.0);
  const DecayFitParams d{DecayForm::RationalQuadratic, 1.0 / 1200.0, 1.0 / 1440000.0, 1};
  CHECK(ford_retrieval_efficiency(TimeNs{0}, 0.6, d) == 0.6);
  CHECK(ford_retrieval_efficiency(TimeNs{600}, 1.0, d) == Approx(1 / 1.75).epsilon(1e-12));
  double prev = 2;
  for (double t = 0; t <= 2000; t += 10) {
    const double e = ford_retrieval_efficiency(TimeNs{t}, 1.0, d);
    REQUIRE(e <= prev);
    prev = e;
  }
  CHECK_THROWS_AS(ford_retrieval_efficiency(TimeNs{-1}, 1.0, d), ParameterError);

  CHECK(loop_retrieval_efficiency(0, 0.9) == 1.0);
  CHECK(loop_retrieval_efficiency(5, 0.9) == Approx(0.59049).epsilon(1e-14));
  CHECK(loop_retrieval_efficiency(9, 0.9) > 1 / std::numbers::e);
  CHECK(loop_retrieval_efficiency(10, 0.9) < 1 / std::numbers::e);
}

TEST_CASE("decay and joint models") {
  const DecayFitParams rq{DecayForm::RationalQuadratic, 1e-3, 1e-7, 21.0};
  const DecayFitParams ex{DecayForm::Exponential, 22.0, 1.0 / 1220.0, 0.0};
  CHECK(g2_decay_model(TimeNs{0}, rq) == 22.0);
  CHECK(g2_decay_model(TimeNs{0}, ex) == 22.0);
  CHECK(g2_decay_model(TimeNs{1220}, ex) == Approx(22.0 / std::numbers::e).epsilon(1e-14));
  CHECK(g2_decay_model(TimeNs{100}, rq) == Approx(1 + 21.0 / (1 + 0.1 + 0.001)).epsilon(1e-14));

  for (double t1 = 0; t1 < 4000; t1 += 37) CHECK(std::fabs(joint_g2_model(TimeNs{t1}, TimeNs{0}, rq, ex) - g2_decay_model(TimeNs{t1}, rq)) < 1e-9);
  CHECK_THROWS_AS(joint_g2_model(TimeNs{0}, TimeNs{0}, ex, ex), ParameterError);
  CHECK_THROWS(joint_g2_model(TimeNs{0}, TimeNs{0}, rq, DecayFitParams{DecayForm::Exponential, 0.0, 1e-3, 0}));

  const double j = joint_g2_model(TimeNs{480}, TimeNs{122.4}, scenarios::fig3a_target(), scenarios::fig3b_target());
  CHECK(j >= 13.0);
  CHECK(j <= 16.0);
}

TEST_CASE("parameter validation") {
  FordParams f;
  f.chi = 1.0;
  CHECK_THROWS_AS(f.validate(), ParameterError);
  LoopParams l;
  l.transmission_per_cycle = 0.0;
  CHECK_THROWS_AS(l.validate(), ParameterError);
  l = LoopParams{};
  l.pc_rise_time = TimeNs{20.0};
  CHECK_THROWS_AS(l.validate(), ParameterError);
  ChannelParams c{100, 2e8, 1.5};
  CHECK_THROWS_AS(c.validate(), ParameterError);
  CHECK(decay_form_from_string("exp") == DecayForm::Exponential);
  CHECK_THROWS_AS(decay_form_from_string("cubic"), ParameterError);
}
