#include "hqm/scenarios.hpp"

#include <cmath>
#include <numbers>

#include "hqm/errors.hpp"
#include "hqm/lm.hpp"

namespace hqm::scenarios {

namespace {

constexpr double kG2At30 = 22.63;
constexpr double kFordLifetime = 1450.0;
constexpr double kLoopLifetime = 1220.0;
constexpr double kImprovedLifetime = 2240.0;
constexpr double kJointPrediction = 14.47;

// Numeric Jacobian by central differences.
ResidualFn numeric(std::function<Eigen::VectorXd(const Eigen::VectorXd&)> g) {
  return [g](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    r = g(x);
    J.resize(r.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double h = 1e-6 * std::max(std::abs(x[j]), 1e-3);
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      J.col(j) = (g(xp) - g(xm)) / (2.0 * h);
    }
  };
}

Eigen::VectorXd unbounded(Eigen::Index n, double sign) {
  return Eigen::VectorXd::Constant(n, sign * std::numeric_limits<double>::infinity());
}

}  // namespace

DecayFitParams fig3a_target() {
  return {DecayForm::RationalQuadratic, 8.257608685794365e-4, 3.563748540701936e-7, 22.17277377690536};
}

DecayFitParams fig3b_target() { return {DecayForm::Exponential, kG2At30, 1.0 / kLoopLifetime, 0.0}; }

DecayFitParams improved_waist_target() { return solve_lifetime_b(fig3a_target(), kImprovedLifetime); }

DecayFitParams solve_fig3a_target() {
  auto g = [](const Eigen::VectorXd& x) {
    const DecayFitParams p{DecayForm::RationalQuadratic, x[0], x[1], x[2]};
    Eigen::VectorXd r(3);
    r[0] = g2_decay_model(TimeNs{30.0}, p) - kG2At30;
    r[1] = g2_decay_model(TimeNs{kFordLifetime}, p) - (1.0 + p.c) / std::numbers::e;
    r[2] = g2_decay_model(TimeNs{480.0}, p) * std::exp(-122.4 / kLoopLifetime) - kJointPrediction;
    return r;
  };
  Eigen::VectorXd x0(3);
  x0 << 7e-4, 4e-7, 22.0;
  LmOptions opt;
  opt.ftol = 1e-20;
  const LmResult res = levenberg_marquardt(numeric(g), x0, unbounded(3, -1.0), unbounded(3, 1.0), opt);
  return {DecayForm::RationalQuadratic, res.x[0], res.x[1], res.x[2]};
}

DecayFitParams solve_lifetime_b(const DecayFitParams& base, double lifetime_ns) {
  if (base.form != DecayForm::RationalQuadratic) throw ParameterError("lifetime solve needs a rational-quadratic curve");
  // 1 + C / d = (1 + C) / e  =>  d = C / ((1 + C) / e - 1)
  const double d = base.c / ((1.0 + base.c) / std::numbers::e - 1.0);
  DecayFitParams out = base;
  out.b = (d - 1.0 - base.a * lifetime_ns) / (lifetime_ns * lifetime_ns);
  if (out.b < 0.0) throw ParameterError("lifetime not reachable with the given A and C");
  return out;
}

FordParams fig3_ford() {
  FordParams f;
  f.chi = 0.09648060598699824;
  f.eta_stokes = 0.4;
  f.eta_as = 0.5;
  f.eta_ret0 = 0.6;
  f.decay = {DecayForm::RationalQuadratic, 6.004436746557448e-3, 2.5909751375901602e-6, 0.0};
  f.bg_stokes = 1e-4;
  f.bg_as = 1.5e-3;
  return f;
}

LoopParams fig3_loop() {
  LoopParams l;
  l.period_tau = TimeNs{10.4};
  l.transmission_per_cycle = 0.9;
  l.pc_rise_time = TimeNs{5.0};
  l.pc_min_spacing = TimeNs{20000.0};
  return l;
}

ChannelParams fig3_channel() { return {0.0, 2.0e8, 1.0}; }

std::vector<double> fig3a_grid() {
  std::vector<double> g;
  for (int i = 0; i < 16; ++i) g.push_back(30.0 + 300.0 * i);
  return g;
}

std::vector<std::int64_t> fig3b_cycles() {
  std::vector<std::int64_t> k;
  for (std::int64_t i = 1; i <= 12; ++i) k.push_back(i);
  return k;
}

RunConfig fig3_pair_config(TimeNs tau1, std::int64_t loop_cycles, std::uint64_t seed, std::uint64_t n_trials) {
  RunConfig c;
  c.seed = seed;
  c.n_trials = n_trials;
  c.ford = fig3_ford();
  c.loop = fig3_loop();
  c.channel = fig3_channel();
  c.timing = PairTiming{tau1, loop_cycles, false};
  return c;
}

Fig3Solution solve_fig3(double bg_as) {
  const DecayFitParams target = fig3a_target();
  FordParams base = fig3_ford();
  base.bg_as = bg_as;
  const LoopParams loop = fig3_loop();
  const ChannelParams ch = fig3_channel();
  auto g = [&](const Eigen::VectorXd& x) {
    FordParams f = base;
    f.chi = x[0];
    f.decay.a = std::exp(x[1]);
    f.decay.b = std::exp(x[2]);
    Eigen::VectorXd r(3);
    int i = 0;
    for (double t : {30.0, 480.0, kFordLifetime}) {
      const auto p = analytic_click_probs(f, TimeNs{t}, kFig3LoopCycles, loop, ch);
      r[i++] = g2_analytic(p) / g2_decay_model(TimeNs{t}, target) - 1.0;
    }
    return r;
  };
  Eigen::VectorXd x0(3);
  x0 << 0.1, std::log(target.a * 10.0), std::log(target.b * 10.0);
  Eigen::VectorXd lo(3), hi(3);
  lo << 1e-4, -30.0, -40.0;
  hi << 0.9, 0.0, 0.0;
  LmOptions opt;
  opt.ftol = 1e-20;
  const LmResult res = levenberg_marquardt(numeric(g), x0, lo, hi, opt);
  if (res.chi2 > 1e-16) throw FitFailure("fig3 calibration did not reach the target curve");
  return {res.x[0], std::exp(res.x[1]), std::exp(res.x[2])};
}

FordParams chain_ford() {
  FordParams f = fig3_ford();
  f.chi = 0.025000012625836177;
  f.bg_as = 1.0551201510226035e-4;
  return f;
}

LoopParams chain_loop() {
  LoopParams l;
  l.period_tau = TimeNs{20.3};
  l.transmission_per_cycle = 0.95;
  l.pc_rise_time = TimeNs{5.0};
  l.pc_min_spacing = TimeNs{33.3};
  return l;
}

ChannelParams chain_link() { return {0.0, 2.0e8, 0.124}; }

ChannelParams chain_delay_fiber() { return {500.0, 2.0e8, 1.0}; }

ChainConstants chain_constants() { return {}; }

ChainPlan chain_plan(const ChainRequest& request) {
  return plan(request, chain_loop(), chain_ford(), chain_delay_fiber(), chain_constants());
}

RunConfig chain_config(const ChainPlan& p, std::uint64_t seed, std::uint64_t n_trials) {
  RunConfig c;
  c.seed = seed;
  c.n_trials = n_trials;
  c.ford = chain_ford();
  c.loop = chain_loop();
  c.channel = chain_link();
  c.delay_fiber = chain_delay_fiber();
  c.feedback = p.constants.feedback;
  c.timing = ChainTiming{p};
  return c;
}

ChainSolution solve_chain() {
  FordParams f = chain_ford();
  // Single-attempt click probability is increasing in chi.
  double lo = 0.0, hi = 0.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (single_attempt_click_probability(mid, f.eta_stokes, f.bg_stokes) < kChainSingleAttemptClick ? lo : hi) = mid;
  }
  f.chi = 0.5 * (lo + hi);

  const ChainPlan p = chain_plan(table1_rows().front().request);
  auto g2_at = [&](double bg) {
    FordParams ff = f;
    ff.bg_as = bg;
    return predict_outcomes(p, ff, chain_loop(), chain_link()).pair(1, "AS1").g2;
  };
  // g2 falls as the background grows.
  double blo = 1e-9, bhi = 1e-1;
  if (g2_at(blo) < kChainTargetG2 || g2_at(bhi) > kChainTargetG2) throw FitFailure("chain g2 target not bracketed");
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(blo * bhi);
    (g2_at(mid) > kChainTargetG2 ? blo : bhi) = mid;
  }
  return {f.chi, std::sqrt(blo * bhi)};
}

}  // namespace hqm::scenarios
