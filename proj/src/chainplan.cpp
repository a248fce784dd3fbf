#include "hqm/chainplan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hqm/errors.hpp"

namespace hqm {

namespace {

bool is_chop(ChainOp op) { return op == ChainOp::Chop || op == ChainOp::ChopFifo || op == ChainOp::ChopFilo; }

// Pump plus the write slots of one feedback period.
TimeNs feedback_window(const ChainPlan& p) {
  const auto& fb = p.constants.feedback;
  return p.pump_duration + fb.attempt_spacing * static_cast<double>(fb.max_attempts - 1);
}

std::vector<OutputMode> build_modes(const ChainPlan& p) {
  const TimeNs tau = p.loop.period_tau;
  std::vector<OutputMode> modes;
  auto add_photon = [&](int photon, TimeNs entry, std::int64_t k) {
    const std::string base = photon == 1 ? "AS1" : "AS2";
    if (p.chopped_photon == photon) {
      modes.push_back({base, photon, grid_time(entry, k, tau), k, p.chop_q});
      modes.push_back({base + "'", photon, grid_time(entry, k + p.chop_gap, tau), k + p.chop_gap, 1.0 - p.chop_q});
    } else {
      modes.push_back({base, photon, grid_time(entry, k, tau), k, 1.0});
    }
  };
  add_photon(1, TimeNs{0.0}, p.k1);
  add_photon(2, p.achieved_t3, p.k2);
  std::stable_sort(modes.begin(), modes.end(), [](const OutputMode& a, const OutputMode& b) { return a.time < b.time; });
  return modes;
}

std::optional<TimeNs> chopped_interval(const ChainPlan& p, const std::vector<OutputMode>& modes) {
  if (p.chopped_photon == 0) return std::nullopt;
  const std::string second = (p.chopped_photon == 1 ? "AS1" : "AS2") + std::string("'");
  const auto it = std::find_if(modes.begin(), modes.end(), [&](const OutputMode& m) { return m.label == second; });
  TimeNs previous{-std::numeric_limits<double>::infinity()};
  for (const auto& m : modes)
    if (m.label != second && m.time < it->time && m.time > previous) previous = m.time;
  return it->time - previous;
}

std::vector<SwitchEvent> build_events(const ChainPlan& p) {
  std::vector<SwitchEvent> ev;
  ev.push_back({TimeNs{0.0}, SwitchKind::MapIn, 1, 1.0});
  ev.push_back({p.achieved_t3, SwitchKind::MapIn, 2, 1.0});
  for (const auto& m : p.modes) {
    const bool first_part = p.chopped_photon == m.photon && m.label.back() != '\'';
    if (first_part) {
      ev.push_back({m.time, SwitchKind::MapOutPartial, m.photon, voltage_for_probability(p.chop_q)});
    } else {
      ev.push_back({m.time, SwitchKind::MapOutFull, m.photon, 1.0});
    }
  }
  std::stable_sort(ev.begin(), ev.end(), [](const SwitchEvent& a, const SwitchEvent& b) { return a.time < b.time; });
  return ev;
}

// Recomputes every derived field from the integer schedule, the requested
// targets and the fine-tune step count.
void materialize(ChainPlan& p) {
  const TimeNs shift = p.constants.fine_tune_step * static_cast<double>(p.fine_tune_steps);
  p.target_t3 = p.base_t3 + shift;
  p.target_t4 = p.base_t4 + shift;
  p.achieved_t3 = p.target_t3;
  p.achieved_t4 = p.achieved_t3 + p.loop.period_tau * static_cast<double>(p.k2 - p.k1);
  p.residual = p.target_t4 - p.achieved_t4;

  const TimeNs as1_path = p.route.as1_via_fiber ? p.route.fiber_delay : p.route.direct_path_offset;
  const TimeNs as2_path = p.route.as2_via_fiber ? p.route.fiber_delay : p.route.direct_path_offset;
  p.t1 = p.constants.t1;
  p.t2 = p.achieved_t3 + as1_path - as2_path;

  p.modes = build_modes(p);
  p.achieved_t5 = chopped_interval(p, p.modes);
  if (p.achieved_t5 && p.target_t5) {
    p.residual_t5 = *p.target_t5 - *p.achieved_t5;
  } else {
    p.residual_t5.reset();
  }
  p.events = build_events(p);
  p.voltages.clear();
  for (const auto& e : p.events)
    if (e.kind != SwitchKind::MapIn) p.voltages.push_back(e.voltage);

  p.warnings.clear();
  if (std::fabs(p.residual.value) > p.constants.fine_tune_step.value / 2.0) {
    std::ostringstream w;
    w << "t4 residual " << p.residual.value << " ns exceeds half a fine-tune step";
    p.warnings.push_back(w.str());
  }
}

void check_schedule(const ChainPlan& p) {
  const TimeNs tau = p.loop.period_tau;
  const TimeNs rise = p.loop.pc_rise_time;
  if (std::fabs(p.achieved_t3.value) < rise.value || phase_distance(p.achieved_t3, TimeNs{0.0}, tau) < rise.value) {
    std::ostringstream msg;
    msg << "t3 = " << p.achieved_t3.value << " ns puts AS2 within the rise time of AS1's loop slot";
    throw SlotCollision(msg.str());
  }
  const TimeNs min_t2 = feedback_window(p);
  if (p.t2 < min_t2) {
    std::ostringstream msg;
    msg << "t2 = " << p.t2.value << " ns is shorter than the second photon's pump and feedback window ("
        << min_t2.value << " ns)";
    throw SchedulingError(msg.str());
  }
  const auto violations = validate_sequence(p.events, p.loop);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "compiled schedule violates loop constraints:";
    for (const auto& v : violations) msg << "\n  " << v.message;
    throw SwitchConstraintViolation(msg.str());
  }
}

std::int64_t steps_for(TimeNs delta, TimeNs step) {
  if (!(step.value > 0.0)) throw ParameterError("fine-tune step must be > 0");
  const double n = delta.value / step.value;
  const double r = std::round(n);
  if (std::fabs(n - r) > 1e-9) {
    std::ostringstream msg;
    msg << "fine-tune delta " << delta.value << " ns is not a multiple of the " << step.value << " ns step";
    throw QuantizationError(msg.str());
  }
  return static_cast<std::int64_t>(r);
}

}  // namespace

std::string to_string(ChainOp op) {
  switch (op) {
    case ChainOp::Fifo: return "FIFO";
    case ChainOp::Filo: return "FILO";
    case ChainOp::Combine: return "COMBINE";
    case ChainOp::Split: return "SPLIT";
    case ChainOp::Chop: return "CHOP";
    case ChainOp::ChopFifo: return "CHOP_FIFO";
    case ChainOp::ChopFilo: return "CHOP_FILO";
    case ChainOp::FineTune: return "FINE_TUNE";
  }
  return "?";
}

ChainOp chain_op_from_string(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (ChainOp op : {ChainOp::Fifo, ChainOp::Filo, ChainOp::Combine, ChainOp::Split, ChainOp::Chop, ChainOp::ChopFifo,
                     ChainOp::ChopFilo, ChainOp::FineTune})
    if (to_string(op) == u) return op;
  throw ParameterError("unknown chain operation '" + s + "'");
}

ChainPlan plan(const ChainRequest& request, const LoopParams& loop, const FordParams& ford,
               const ChannelParams& channel, const ChainConstants& constants) {
  loop.validate();
  ford.validate();
  channel.validate(false);
  constants.feedback.validate(ford);
  if (constants.base_cycles < 0) throw ParameterError("base_cycles must be >= 0");
  if (!request.target_t3.finite() || !request.target_t4.finite()) throw ParameterError("chain targets must be finite");

  const TimeNs tau = loop.period_tau;
  const double t3 = request.target_t3.value;
  const double t4 = request.target_t4.value;

  if (request.operation == ChainOp::Fifo && !(t4 > 0.0))
    throw UnreachableOrdering("FIFO requires AS2 to leave after AS1 (t4 > 0)");
  if (request.operation == ChainOp::Filo && !(t4 < 0.0))
    throw UnreachableOrdering("FILO requires AS2 to leave before AS1 (t4 < 0)");
  if (request.operation == ChainOp::Chop && !request.chop_ratio)
    throw ParameterError("CHOP requires a chop ratio");

  ChainPlan p;
  p.operation = request.operation;
  p.constants = constants;
  p.loop = loop;
  p.pump_duration = ford.pump_duration;
  p.route = ChainRoute{true, false, channel.delay(), channel.transmission, constants.direct_path_offset};
  p.base_t3 = request.target_t3;
  p.base_t4 = request.target_t4;
  p.target_t5 = request.target_t5;

  const auto dk = static_cast<std::int64_t>(std::llround((t4 - t3) / tau.value));
  p.k1 = constants.base_cycles + (dk < 0 ? -dk : 0);
  p.k2 = constants.base_cycles + (dk > 0 ? dk : 0);

  const double achieved_t4 = t3 + static_cast<double>(dk) * tau.value;
  if ((t4 > 0.0) != (achieved_t4 > 0.0) || achieved_t4 == 0.0) {
    std::ostringstream msg;
    msg << "requested order (t4 = " << t4 << " ns) is not reachable on the " << tau.value
        << " ns grid from t3 = " << t3 << " ns";
    throw UnreachableOrdering(msg.str());
  }

  if (is_chop(request.operation)) {
    p.chopped_photon = request.operation == ChainOp::ChopFilo ? 1 : 2;
    const auto ratio = request.chop_ratio.value_or(std::pair<double, double>{1.0, 1.0});
    if (!(ratio.first > 0.0 && ratio.second > 0.0) || !std::isfinite(ratio.first) || !std::isfinite(ratio.second))
      throw ParameterError("chop ratio parts must be positive");
    const double r = ratio.first / ratio.second;
    const TimeNs target_t5 = request.target_t5.value_or(tau);
    const double T = loop.transmission_per_cycle;

    // Gap between the two parts: the whole number of cycles whose resulting
    // t5 is closest to the target (smallest gap on ties).
    double best_err = std::numeric_limits<double>::infinity();
    std::int64_t best_gap = 1;
    for (std::int64_t j = 1; j <= constants.max_chop_gap; ++j) {
      ChainPlan trial = p;
      trial.chop_gap = j;
      trial.chop_q = 0.5;
      materialize(trial);
      const double err = std::fabs(trial.achieved_t5->value - target_t5.value);
      if (err < best_err - 1e-12) {
        best_err = err;
        best_gap = j;
      }
    }
    p.chop_gap = best_gap;
    // P1 / P2 = q / (T^j (1 - q)) = r
    const double tj = std::pow(T, static_cast<double>(best_gap));
    p.chop_q = std::clamp(r * tj / (1.0 + r * tj), 0.0, 1.0);
  }

  materialize(p);
  check_schedule(p);

  if (request.operation == ChainOp::FineTune) {
    const std::int64_t steps = steps_for(request.fine_tune_delta, constants.fine_tune_step);
    if (steps != 0) p = fine_tune(p, request.fine_tune_delta, constants.fine_tune_step);
  }
  return p;
}

ChainPlan fine_tune(const ChainPlan& p, TimeNs delta, TimeNs step) {
  const std::int64_t steps = steps_for(delta, step);
  if (steps == 0) return p;
  // Stored as a count of the plan's own step so +d followed by -d is exact.
  const std::int64_t plan_steps = steps_for(delta, p.constants.fine_tune_step);
  ChainPlan out = p;
  out.fine_tune_steps += plan_steps;
  materialize(out);
  check_schedule(out);
  return out;
}

TimeNs chain_storage_time(const ChainPlan& p, int photon, int attempt) {
  const auto& fb = p.constants.feedback;
  if (attempt < 0 || attempt >= fb.max_attempts) throw ParameterError("attempt index out of range");
  const TimeNs to_last = fb.attempt_spacing * static_cast<double>(fb.max_attempts - 1 - attempt);
  if (photon == 1) return p.t1 + to_last;
  if (photon == 2) {
    // The second photon's period starts at the first read; t2 spans its pump,
    // the write slots and its storage.
    return p.t2 - p.pump_duration - fb.attempt_spacing * static_cast<double>(attempt);
  }
  throw ParameterError("photon index must be 1 or 2");
}

ClickProbabilities feedback_click_probs(double chi, double eta_stokes, double bg_stokes,
                                        const std::vector<double>& eta_by_attempt, double bg_as) {
  if (eta_by_attempt.empty()) throw ParameterError("at least one write attempt is required");
  const double p1 = single_attempt_click_probability(chi, eta_stokes, bg_stokes);
  ClickProbabilities out;
  double none_before = 1.0;
  for (double eta : eta_by_attempt) {
    const auto single = click_probs_for_efficiency(chi, eta_stokes, bg_stokes, eta, bg_as);
    out.p_coinc += none_before * single.p_coinc;
    none_before *= 1.0 - p1;
  }
  out.p_stokes = 1.0 - none_before;
  out.p_as = out.p_coinc + none_before * (-std::expm1(-bg_as));
  return out;
}

const PairPrediction& ChainPrediction::pair(int herald, const std::string& mode) const {
  for (const auto& p : pairs)
    if (p.herald == herald && p.mode == mode) return p;
  throw LookupError("no prediction for herald S" + std::to_string(herald) + " and mode " + mode);
}

ChainPrediction predict_outcomes(const ChainPlan& p, const FordParams& ford, const LoopParams& loop,
                                 const ChannelParams& channel) {
  ford.validate();
  loop.validate();
  channel.validate();
  const auto& fb = p.constants.feedback;
  const double p1 = single_attempt_click_probability(ford.chi, ford.eta_stokes, ford.bg_stokes);

  ChainPrediction out;
  out.herald_probability = feedback_success_probability(p1, fb.max_attempts);

  auto mode_eta = [&](const OutputMode& m, int attempt) {
    const TimeNs tau1 = chain_storage_time(p, m.photon, attempt);
    const bool fiber = m.photon == 1 ? p.route.as1_via_fiber : p.route.as2_via_fiber;
    return ford.eta_as * ford_retrieval_efficiency(tau1, ford.eta_ret0, ford.decay) * channel.transmission *
           (fiber ? p.route.fiber_transmission : 1.0) *
           loop_retrieval_efficiency(m.cycles, loop.transmission_per_cycle) * m.fraction;
  };

  for (const auto& m : p.modes) {
    std::vector<double> etas;
    double weighted = 0.0;
    double none_before = 1.0;
    for (int a = 0; a < fb.max_attempts; ++a) {
      etas.push_back(mode_eta(m, a));
      weighted += none_before * p1 * etas.back();
      none_before *= 1.0 - p1;
    }
    const double success = 1.0 - none_before;
    out.modes.push_back({m.label, m.photon, m.time, success > 0.0 ? weighted / success : etas.back()});

    const auto own = feedback_click_probs(ford.chi, ford.eta_stokes, ford.bg_stokes, etas, ford.bg_as);
    for (int herald = 1; herald <= 2; ++herald) {
      PairPrediction pp;
      pp.herald = herald;
      pp.mode = m.label;
      if (herald == m.photon) {
        pp.probs = own;
        pp.g2 = own.p_stokes > 0.0 && own.p_as > 0.0 ? g2_analytic(own) : 1.0;
      } else {
        // Successive heralded pairs are independent.
        pp.probs = {own.p_stokes, own.p_as, own.p_stokes * own.p_as};
        pp.g2 = 1.0;
      }
      out.pairs.push_back(pp);
    }
  }
  return out;
}

const std::vector<Table1Row>& table1_rows() {
  static const std::vector<Table1Row> rows = [] {
    auto req = [](ChainOp op, double t3, double t4) {
      ChainRequest r;
      r.operation = op;
      r.target_t3 = TimeNs{t3};
      r.target_t4 = TimeNs{t4};
      return r;
    };
    auto tune = [&](double delta) {
      ChainRequest r = req(ChainOp::FineTune, 30.0, 90.0);
      r.fine_tune_delta = TimeNs{delta};
      return r;
    };
    auto chop = [&](ChainOp op, double t5, std::optional<std::pair<double, double>> ratio) {
      ChainRequest r = req(op, 10.0, 10.0);
      r.target_t5 = TimeNs{t5};
      r.chop_ratio = ratio;
      return r;
    };
    const TimeNs t1{565.5};
    std::vector<Table1Row> v;
    v.push_back({"FIFO", req(ChainOp::Fifo, 10, 10), t1, TimeNs{2488.5}, TimeNs{10}, TimeNs{10}, std::nullopt});
    v.push_back({"FILO", req(ChainOp::Filo, 10, -10), t1, TimeNs{2488.5}, TimeNs{10}, TimeNs{-10}, std::nullopt});
    v.push_back({"Combine", req(ChainOp::Combine, 70, 10), t1, TimeNs{2548.5}, TimeNs{70}, TimeNs{10}, std::nullopt});
    v.push_back({"Split", req(ChainOp::Split, 30, 90), t1, TimeNs{2508.5}, TimeNs{30}, TimeNs{90}, std::nullopt});
    v.push_back({"(+2 ns)", tune(2.0), t1, TimeNs{2510.5}, TimeNs{32}, TimeNs{92}, std::nullopt});
    v.push_back({"(-2 ns)", tune(-2.0), t1, TimeNs{2506.5}, TimeNs{28}, TimeNs{88}, std::nullopt});
    v.push_back({"(+4 ns)", tune(4.0), t1, TimeNs{2512.5}, TimeNs{34}, TimeNs{94}, std::nullopt});
    v.push_back({"Chop 1:3", chop(ChainOp::Chop, 20, std::pair{1.0, 3.0}), t1, TimeNs{2488.5}, TimeNs{10}, TimeNs{10}, TimeNs{20}});
    v.push_back({"Chop 2:3", chop(ChainOp::Chop, 20, std::pair{2.0, 3.0}), t1, TimeNs{2488.5}, TimeNs{10}, TimeNs{10}, TimeNs{20}});
    v.push_back({"Chop 7:3", chop(ChainOp::Chop, 20, std::pair{7.0, 3.0}), t1, TimeNs{2488.5}, TimeNs{10}, TimeNs{10}, TimeNs{20}});
    v.push_back({"Chop-FIFO", chop(ChainOp::ChopFifo, 40, std::nullopt), t1, TimeNs{2488.5}, TimeNs{10}, TimeNs{10}, TimeNs{40}});
    v.push_back({"Chop-FILO", chop(ChainOp::ChopFilo, 10, std::nullopt), t1, TimeNs{2488.5}, TimeNs{10}, TimeNs{10}, TimeNs{10}});
    return v;
  }();
  return rows;
}

}  // namespace hqm
