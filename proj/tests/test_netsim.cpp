#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "hqm/errors.hpp"
#include "hqm/estimators.hpp"
#include "hqm/io.hpp"
#include "hqm/netsim.hpp"
#include "hqm/scenarios.hpp"

using namespace hqm;
using Catch::Approx;

namespace {

RunConfig ideal_pair(double chi, std::uint64_t n) {
  RunConfig c;
  c.seed = 17;
  c.n_trials = n;
  c.ford.chi = chi;
  c.ford.eta_stokes = 1.0;
  c.ford.eta_as = 1.0;
  c.ford.decay = {DecayForm::RationalQuadratic, 0, 0, 1};
  c.loop.transmission_per_cycle = 1.0;
  c.timing = PairTiming{TimeNs{30.0}, 2, false};
  return c;
}

std::string serialize(const std::vector<DetectionRecord>& r) {
  std::ostringstream os;
  write_records_csv(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("event queue orders by time then insertion") {
  EventQueue q;
  q.push(TimeNs{5}, EventKind::Read, 1);
  q.push(TimeNs{1}, EventKind::Pump);
  q.push(TimeNs{5}, EventKind::LoopArrive, 2);
  q.push(TimeNs{3}, EventKind::WriteAttempt);
  std::vector<double> times;
  std::vector<int> photons;
  while (!q.empty()) {
    const Event e = q.pop();
    times.push_back(e.time.value);
    photons.push_back(e.photon);
  }
  CHECK(times == std::vector<double>{1, 3, 5, 5});
  CHECK(photons[2] == 1);
  CHECK(photons[3] == 2);
}

TEST_CASE("run validation and trivial runs") {
  RunConfig c = ideal_pair(0.0, 1);
  c.n_trials = 0;
  CHECK_THROWS_AS(run(c), ParameterError);
  c.n_trials = 1;
  CHECK(run(c).empty());
  c.n_trials = 1000;
  CHECK(run(c).empty());
}

TEST_CASE("runs are deterministic and thread-count independent") {
  RunConfig c = scenarios::fig3_pair_config(TimeNs{30}, 3, 99, 50000);
  c.ford.bg_as = 0.01;
  c.threads = 1;
  const auto a = serialize(run(c));
  c.threads = 3;
  const auto b = serialize(run(c));
  CHECK(a == b);
  CHECK(a.size() > 100);
  c.seed = 100;
  CHECK(serialize(run(c)) != a);
}

TEST_CASE("records are sorted and causal") {
  RunConfig c = ideal_pair(0.3, 20000);
  c.ford.bg_stokes = 0.0;
  const auto recs = run(c);
  REQUIRE_FALSE(recs.empty());
  std::uint64_t emitted_trials = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (i > 0) {
      REQUIRE(recs[i - 1].trial_id <= recs[i].trial_id);
      if (recs[i - 1].trial_id == recs[i].trial_id) REQUIRE(recs[i - 1].time <= recs[i].time);
    }
    if (recs[i].detector == Detector::S) {
      REQUIRE(recs[i].time == TimeNs{1000.0});
      ++emitted_trials;
    } else {
      // herald at 1000, read at +30, two loop cycles of 10.4 ns
      REQUIRE(recs[i].time.value == Approx(1000 + 30 + 2 * 10.4).margin(1e-9));
    }
  }
  CHECK(emitted_trials > 0);
}

TEST_CASE("lossless pairs always produce anti-Stokes clicks after a herald") {
  RunConfig c = ideal_pair(0.05, 20000);
  const auto recs = run(c);
  std::map<std::uint64_t, std::pair<bool, bool>> seen;
  for (const auto& r : recs) {
    auto& s = seen[r.trial_id];
    if (r.detector == Detector::S) s.first = true;
    else s.second = true;
  }
  for (const auto& [id, s] : seen) {
    REQUIRE(s.first);
    REQUIRE(s.second);
  }
}

TEST_CASE("delay fiber adds 2.5 us") {
  const auto sel = route_path_selection(true, ChannelParams{500, 2e8, 0.7});
  CHECK(sel.delay == TimeNs{2500.0});
  CHECK(sel.transmission == 0.7);
  CHECK(route_path_selection(false, ChannelParams{500, 2e8, 0.7}).delay == TimeNs{0.0});

  RunConfig c = ideal_pair(0.2, 2000);
  c.timing = PairTiming{TimeNs{30.0}, 2, true};
  RunConfig d = c;
  d.timing = PairTiming{TimeNs{30.0}, 2, false};
  CHECK(gate_by_label(c, "AS").center.value - gate_by_label(d, "AS").center.value == Approx(2500.0).margin(1e-9));
  for (const auto& r : run(c))
    if (r.detector != Detector::S) REQUIRE(r.time.value == Approx(1000 + 30 + 2500 + 2 * 10.4).margin(1e-9));
}

TEST_CASE("hbt splitter statistics") {
  RngStream rng(5, 0);
  CHECK(hbt_split(0, rng) == 0);
  const std::uint64_t n = 1000000;
  CHECK(std::fabs(static_cast<double>(hbt_split(n, rng)) / static_cast<double>(n) - 0.5) < 0.0015);
  int both = 0;
  const int m = 100000;
  for (int i = 0; i < m; ++i) {
    const auto a = hbt_split(2, rng);
    both += a == 1;
  }
  CHECK(std::fabs(both / double(m) - 0.5) < 4 * std::sqrt(0.25 / m));
}

TEST_CASE("Monte Carlo agrees with the closed form") {
  RunConfig c;
  c.seed = 3;
  c.n_trials = 1000000;
  c.ford.chi = 0.02;
  c.ford.eta_stokes = 0.3;
  c.ford.eta_as = 0.124;
  c.ford.decay = {DecayForm::RationalQuadratic, 0, 0, 1};
  c.ford.bg_stokes = 1e-4;
  c.ford.bg_as = 1e-4;
  c.loop.transmission_per_cycle = 1.0;
  c.timing = PairTiming{TimeNs{30.0}, 0, false};

  const auto s = WindowSpec::from_gate(gate_by_label(c, "S"));
  const auto a = WindowSpec::from_gate(gate_by_label(c, "AS"));
  const auto acc = run_streaming<CoincidenceCounter>(c, [&] { return CoincidenceCounter({{s, a}}); });
  const auto p = analytic_click_probs(c.ford, TimeNs{30}, 0, c.loop, c.channel);
  const double n = static_cast<double>(c.n_trials);
  auto within = [&](double count, double prob) { return std::fabs(count / n - prob) <= 3 * std::sqrt(prob * (1 - prob) / n); };
  CHECK(within(static_cast<double>(acc.n_a(0)), p.p_stokes));
  CHECK(within(static_cast<double>(acc.n_b(0)), p.p_as));
  CHECK(within(static_cast<double>(acc.n_coinc(0)), p.p_coinc));
  const auto g = acc.estimate(0);
  CHECK(std::fabs(g.value - g2_analytic(p)) <= 3 * g.std_err);
}

TEST_CASE("chain runs emit records in every labelled gate") {
  const ChainPlan p = scenarios::chain_plan(table1_rows().front().request);
  RunConfig c = scenarios::chain_config(p, 8, 20000);
  const auto gates = scenario_gates(c);
  std::vector<std::string> labels;
  for (const auto& g : gates) labels.push_back(g.label);
  CHECK(std::find(labels.begin(), labels.end(), "S1") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "S2") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "AS1") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "AS2") != labels.end());
  CHECK_THROWS_AS(gate_by_label(c, "AS7"), LookupError);
  // AS2 follows AS1 by t4 at the detectors
  CHECK(gate_by_label(c, "AS2").center.value - gate_by_label(c, "AS1").center.value ==
        Approx(p.achieved_t4.value).margin(1e-9));
}

TEST_CASE("thread count resolution") {
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(0) >= 1);
}
