#include "hqm/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "hqm/errors.hpp"

namespace hqm {

const char* to_string(Detector d) {
  switch (d) {
    case Detector::S: return "S";
    case Detector::AS_A: return "AS_A";
    case Detector::AS_B: return "AS_B";
    case Detector::AUX: return "AUX";
  }
  return "?";
}

Detector detector_from_string(const std::string& s) {
  for (Detector d : {Detector::S, Detector::AS_A, Detector::AS_B, Detector::AUX})
    if (s == to_string(d)) return d;
  throw ParameterError("unknown detector '" + s + "'");
}

namespace {

bool event_after(const Event& a, const Event& b) {
  if (a.time.value != b.time.value) return a.time.value > b.time.value;
  return a.sequence_no > b.sequence_no;
}

}  // namespace

void EventQueue::push(TimeNs time, EventKind kind, int photon, std::uint64_t count, int attempt) {
  heap_.push_back({time, next_seq_++, kind, photon, count, attempt});
  std::push_heap(heap_.begin(), heap_.end(), event_after);
}

Event EventQueue::pop() {
  if (heap_.empty()) throw SequencingError("pop from an empty event queue");
  std::pop_heap(heap_.begin(), heap_.end(), event_after);
  Event e = heap_.back();
  heap_.pop_back();
  return e;
}

void EventQueue::clear() {
  heap_.clear();
  next_seq_ = 0;
}

PathSelection route_path_selection(bool use_delay_fiber, const ChannelParams& delay_fiber) {
  if (!use_delay_fiber) return {};
  return {delay_fiber.delay(), delay_fiber.transmission};
}

std::uint64_t hbt_split(std::uint64_t photons, RngStream& rng) { return rng.binomial(photons, 0.5); }

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HQM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct LoopAction {
  std::int64_t cycle = 0;
  SwitchKind kind = SwitchKind::MapOutFull;
  double voltage = 1.0;
};

// Everything about a scenario that does not change between trials.
struct Geometry {
  bool chain = false;
  int photons = 1;
  FeedbackConfig feedback;
  TimeNs period_start[3]{};  // pump start per photon
  TimeNs read_time[3]{};     // chain: fixed read times
  TimeNs path_delay[3]{};    // read to loop input (or detector without loop)
  double path_eta[3]{};      // eta_as, link and path selection
  std::vector<LoopAction> actions[3];
  std::vector<Gate> gates;
};

const PairTiming* pair_timing(const RunConfig& cfg) { return std::get_if<PairTiming>(&cfg.timing); }
const ChainTiming* chain_timing(const RunConfig& cfg) { return std::get_if<ChainTiming>(&cfg.timing); }

bool held_voltage(const RunConfig& cfg) {
  return pair_timing(cfg) && cfg.topology.loop && cfg.loop.voltage_ratio < 1.0;
}

Geometry build_geometry(const RunConfig& cfg) {
  Geometry g;
  const TimeNs pumpd = cfg.ford.pump_duration;
  const TimeNs gw = cfg.gate_width;
  const double bg_det = cfg.topology.hbt ? cfg.ford.bg_as / 2.0 : cfg.ford.bg_as;
  const std::uint32_t as_mask = cfg.topology.hbt ? kAntiStokesMask : detector_bit(Detector::AS_A);

  auto stokes_gate = [&](const std::string& label, TimeNs start, const FeedbackConfig& fb) {
    const TimeNs span = fb.attempt_spacing * static_cast<double>(fb.max_attempts - 1);
    return Gate{label, detector_bit(Detector::S), start + pumpd + span / 2.0, span + gw, cfg.ford.bg_stokes};
  };

  if (const auto* pt = pair_timing(cfg)) {
    g.feedback = cfg.feedback;
    const auto sel = route_path_selection(pt->use_delay_fiber, cfg.delay_fiber);
    g.path_delay[1] = cfg.channel.delay() + sel.delay;
    g.path_eta[1] = cfg.ford.eta_as * cfg.channel.transmission * sel.transmission;
    g.gates.push_back(stokes_gate("S", TimeNs{0.0}, g.feedback));

    const TimeNs span = g.feedback.attempt_spacing * static_cast<double>(g.feedback.max_attempts - 1);
    const TimeNs first_arrival = pumpd + pt->tau1 + g.path_delay[1];
    const TimeNs tau = cfg.loop.period_tau;
    if (!cfg.topology.loop) {
      g.gates.push_back({"AS", as_mask, first_arrival + span / 2.0, span + gw, bg_det});
    } else if (!held_voltage(cfg)) {
      g.actions[1].push_back({pt->loop_cycles, SwitchKind::MapOutFull, 1.0});
      const TimeNs out = grid_time(first_arrival, pt->loop_cycles, tau);
      g.gates.push_back({"AS", as_mask, out + span / 2.0, span + gw, bg_det});
    } else {
      for (std::int64_t r = 1; r <= pt->loop_cycles; ++r) {
        g.actions[1].push_back({r, SwitchKind::MapOutPartial, cfg.loop.voltage_ratio});
        g.gates.push_back({"AS@" + std::to_string(r), as_mask, grid_time(first_arrival, r, tau), gw, bg_det});
      }
    }
    return g;
  }

  const ChainPlan& p = chain_timing(cfg)->plan;
  g.chain = true;
  g.photons = 2;
  g.feedback = p.constants.feedback;
  const TimeNs span = g.feedback.attempt_spacing * static_cast<double>(g.feedback.max_attempts - 1);
  g.period_start[1] = TimeNs{0.0};
  g.read_time[1] = pumpd + span + p.t1;
  g.period_start[2] = g.read_time[1];
  g.read_time[2] = g.read_time[1] + p.t2;
  for (int ph = 1; ph <= 2; ++ph) {
    const bool fiber = ph == 1 ? p.route.as1_via_fiber : p.route.as2_via_fiber;
    g.path_delay[ph] = cfg.channel.delay() + (fiber ? p.route.fiber_delay : p.route.direct_path_offset);
    g.path_eta[ph] = cfg.ford.eta_as * cfg.channel.transmission * (fiber ? p.route.fiber_transmission : 1.0);
  }
  for (const auto& m : p.modes) {
    const bool first_part = p.chopped_photon == m.photon && m.label.back() != '\'';
    g.actions[m.photon].push_back({m.cycles, first_part ? SwitchKind::MapOutPartial : SwitchKind::MapOutFull,
                                   first_part ? voltage_for_probability(p.chop_q) : 1.0});
  }
  for (auto& a : g.actions)
    std::sort(a.begin(), a.end(), [](const LoopAction& x, const LoopAction& y) { return x.cycle < y.cycle; });

  g.gates.push_back(stokes_gate("S1", g.period_start[1], g.feedback));
  g.gates.push_back(stokes_gate("S2", g.period_start[2], g.feedback));
  const TimeNs loop_ref = g.read_time[1] + g.path_delay[1];
  for (const auto& m : p.modes) g.gates.push_back({m.label, as_mask, loop_ref + m.time, gw, bg_det});
  std::stable_sort(g.gates.begin(), g.gates.end(), [](const Gate& a, const Gate& b) { return a.center < b.center; });
  return g;
}

}  // namespace

void RunConfig::validate() const {
  if (n_trials < 1) throw ParameterError("n_trials must be >= 1");
  ford.validate();
  loop.validate();
  channel.validate(true);
  delay_fiber.validate(false);
  if (!gate_width.finite() || !(gate_width.value > 0.0)) throw ParameterError("gate width must be > 0");
  if (!(pulse_fwhm_ns > 0.0)) throw ParameterError("pulse FWHM must be > 0");

  if (const auto* pt = pair_timing(*this)) {
    feedback.validate(ford);
    if (!pt->tau1.finite() || pt->tau1.value < 0.0) throw ParameterError("tau1 must be >= 0");
    if (pt->loop_cycles < 0) throw ParameterError("loop_cycles must be >= 0");
    if (!topology.loop && pt->loop_cycles > 0) throw ParameterError("loop_cycles > 0 requires the loop in the topology");
    if (held_voltage(*this)) {
      if (pt->loop_cycles < 1) throw ParameterError("a held partial voltage needs loop_cycles >= 1 passes");
      if (feedback.max_attempts != 1) throw ParameterError("a held partial voltage requires max_attempts = 1");
    }
  } else {
    const ChainPlan& p = std::get<ChainTiming>(timing).plan;
    if (!topology.loop) throw ParameterError("chain timing requires the loop in the topology");
    p.constants.feedback.validate(ford);
    if (p.loop.period_tau != loop.period_tau)
      throw ParameterError("chain plan was compiled for a different loop period");
    const TimeNs window =
        ford.pump_duration + p.constants.feedback.attempt_spacing * static_cast<double>(p.constants.feedback.max_attempts - 1);
    if (p.t2 < window) throw SchedulingError("t2 is shorter than the second photon's pump and feedback window");
    const auto violations = validate_sequence(p.events, loop);
    if (!violations.empty()) {
      std::ostringstream msg;
      msg << "schedule violates loop constraints:";
      for (const auto& v : violations) msg << "\n  " << v.message;
      throw SwitchConstraintViolation(msg.str());
    }
  }

  const auto gates = scenario_gates(*this);
  for (std::size_t i = 0; i < gates.size(); ++i)
    for (std::size_t j = i + 1; j < gates.size(); ++j)
      if ((gates[i].detectors & gates[j].detectors) != 0 &&
          std::fabs(gates[i].center.value - gates[j].center.value) < (gates[i].width.value + gates[j].width.value) / 2.0)
        throw ParameterError("detection gates '" + gates[i].label + "' and '" + gates[j].label + "' overlap");
}

std::vector<Gate> scenario_gates(const RunConfig& cfg) { return build_geometry(cfg).gates; }

Gate gate_by_label(const RunConfig& cfg, const std::string& label) {
  for (auto& g : scenario_gates(cfg))
    if (g.label == label) return g;
  throw LookupError("scenario has no gate labelled '" + label + "'");
}

struct TrialEngine::Impl {
  explicit Impl(const RunConfig& c) : cfg(c), geo(build_geometry(c)), loop(c.loop) {
    for (std::size_t i = 0; i < geo.gates.size(); ++i)
      if ((geo.gates[i].detectors & detector_bit(Detector::S)) == 0) as_gates.push_back(i);
    photons_a.resize(as_gates.size());
    photons_b.resize(as_gates.size());
    arrival.resize(as_gates.size());
    if (const auto* pt = pair_timing(c)) tau1 = pt->tau1;
  }

  void run_trial(std::uint64_t trial_id, std::vector<DetectionRecord>& out);
  void on_write(const Event& ev, std::uint64_t trial_id, std::vector<DetectionRecord>& out);
  void on_read(const Event& ev);
  void on_loop_arrive(const Event& ev);
  void on_loop_pass(const Event& ev);
  void on_loop_switch(const Event& ev);
  void on_detector(const Event& ev);

  RunConfig cfg;
  Geometry geo;
  std::vector<std::size_t> as_gates;
  TimeNs tau1{0.0};

  RngStream rng{0, 0};
  EventQueue queue;
  LoopState loop;
  FordState ford;
  std::size_t next_action[3]{};
  std::vector<std::uint64_t> photons_a, photons_b;
  std::vector<TimeNs> arrival;
};

void TrialEngine::Impl::run_trial(std::uint64_t trial_id, std::vector<DetectionRecord>& out) {
  rng = trial_stream(cfg.seed, trial_id);
  queue.clear();
  loop.clear();
  ford = FordState{};
  std::fill(std::begin(next_action), std::end(next_action), 0);
  std::fill(photons_a.begin(), photons_a.end(), 0);
  std::fill(photons_b.begin(), photons_b.end(), 0);
  const std::size_t first_record = out.size();

  queue.push(geo.period_start[1], EventKind::Pump, 1);
  while (!queue.empty()) {
    const Event ev = queue.pop();
    switch (ev.kind) {
      case EventKind::Pump:
        ford.clock = ev.time;
        ford = pump(ford, cfg.ford);
        queue.push(ford.clock, EventKind::WriteAttempt, ev.photon, 0, 0);
        break;
      case EventKind::WriteAttempt: on_write(ev, trial_id, out); break;
      case EventKind::Read: on_read(ev); break;
      case EventKind::LoopArrive: on_loop_arrive(ev); break;
      case EventKind::LoopPass: on_loop_pass(ev); break;
      case EventKind::LoopSwitch: on_loop_switch(ev); break;
      case EventKind::DetectorArrive: on_detector(ev); break;
    }
  }

  const bool hbt = cfg.topology.hbt;
  for (std::size_t i = 0; i < as_gates.size(); ++i) {
    const Gate& g = geo.gates[as_gates[i]];
    auto emit = [&](Detector d, std::uint64_t photons) {
      const bool background = rng.poisson(g.background_per_detector) > 0;
      if (photons > 0) {
        out.push_back({trial_id, d, arrival[i]});
      } else if (background) {
        out.push_back({trial_id, d, TimeNs{g.center.value - g.width.value / 2.0 + rng.uniform() * g.width.value}});
      }
    };
    emit(Detector::AS_A, photons_a[i]);
    if (hbt) emit(Detector::AS_B, photons_b[i]);
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(first_record), out.end(),
            [](const DetectionRecord& a, const DetectionRecord& b) {
              if (a.time.value != b.time.value) return a.time.value < b.time.value;
              return a.detector < b.detector;
            });
}

void TrialEngine::Impl::on_write(const Event& ev, std::uint64_t trial_id, std::vector<DetectionRecord>& out) {
  ford.clock = ev.time;
  const auto w = write_attempt(ford, cfg.ford, rng);
  ford = w.state;
  const int ph = ev.photon;
  if (w.stokes_click) {
    out.push_back({trial_id, Detector::S, ev.time});
    queue.push(geo.chain ? geo.read_time[ph] : ev.time + tau1, EventKind::Read, ph);
  } else if (ev.attempt + 1 < geo.feedback.max_attempts) {
    queue.push(ev.time + geo.feedback.attempt_spacing, EventKind::WriteAttempt, ph, 0, ev.attempt + 1);
  } else if (geo.chain && ph == 1) {
    queue.push(geo.period_start[2], EventKind::Pump, 2);
  }
}

void TrialEngine::Impl::on_read(const Event& ev) {
  const int ph = ev.photon;
  const auto r = read_out(ford, cfg.ford, ev.time - *ford.herald_time, rng);
  ford = r.state;
  if (geo.chain && ph == 1) queue.push(ev.time, EventKind::Pump, 2);
  const std::uint64_t n = rng.binomial(r.anti_stokes_emitted, geo.path_eta[ph]);
  if (n == 0) return;
  const TimeNs at = r.emission_time + geo.path_delay[ph];
  queue.push(at, cfg.topology.loop ? EventKind::LoopArrive : EventKind::DetectorArrive, ph, n);
}

void TrialEngine::Impl::on_loop_arrive(const Event& ev) {
  const int ph = ev.photon;
  loop.map_in(ph, ev.time, ev.count);
  const auto& acts = geo.actions[ph];
  if (acts.empty()) {
    loop.discard(ph);
  } else if (acts.front().cycle == 0) {
    queue.push(ev.time, EventKind::LoopSwitch, ph);
  } else {
    queue.push(ev.time + cfg.loop.period_tau, EventKind::LoopPass, ph);
  }
}

void TrialEngine::Impl::on_loop_pass(const Event& ev) {
  const int ph = ev.photon;
  const auto& occ = loop.pass(ph, rng);
  if (occ.count == 0) {
    loop.discard(ph);
    return;
  }
  const auto& acts = geo.actions[ph];
  if (occ.cycles_completed == acts[next_action[ph]].cycle) {
    queue.push(ev.time, EventKind::LoopSwitch, ph);
  } else {
    queue.push(ev.time + cfg.loop.period_tau, EventKind::LoopPass, ph);
  }
}

void TrialEngine::Impl::on_loop_switch(const Event& ev) {
  const int ph = ev.photon;
  const auto& acts = geo.actions[ph];
  const LoopAction act = acts[next_action[ph]++];
  if (act.kind == SwitchKind::MapOutFull) {
    const auto e = loop.map_out_full(ph, act.cycle);
    if (e.count > 0) queue.push(e.time, EventKind::DetectorArrive, ph, e.count);
    return;
  }
  const auto e = loop.partial_out(ph, act.voltage, rng);
  if (e.count > 0) queue.push(e.time, EventKind::DetectorArrive, ph, e.count);
  if (next_action[ph] < acts.size() && loop.occupant(ph).count > 0) {
    queue.push(ev.time + cfg.loop.period_tau, EventKind::LoopPass, ph);
  } else {
    loop.discard(ph);
  }
}

void TrialEngine::Impl::on_detector(const Event& ev) {
  for (std::size_t i = 0; i < as_gates.size(); ++i) {
    if (!geo.gates[as_gates[i]].contains(ev.time)) continue;
    const std::uint64_t a = cfg.topology.hbt ? hbt_split(ev.count, rng) : ev.count;
    if (photons_a[i] + photons_b[i] == 0 || ev.time < arrival[i]) arrival[i] = ev.time;
    photons_a[i] += a;
    photons_b[i] += ev.count - a;
    return;
  }
}

TrialEngine::TrialEngine(const RunConfig& cfg) : impl_(std::make_unique<Impl>(cfg)) {}
TrialEngine::~TrialEngine() = default;
TrialEngine::TrialEngine(TrialEngine&&) noexcept = default;
TrialEngine& TrialEngine::operator=(TrialEngine&&) noexcept = default;

void TrialEngine::run_trial(std::uint64_t trial_id, std::vector<DetectionRecord>& out) {
  impl_->run_trial(trial_id, out);
}

namespace {

struct RecordSink {
  std::vector<DetectionRecord> records;
  void add(std::uint64_t, std::span<const DetectionRecord> r) { records.insert(records.end(), r.begin(), r.end()); }
  void merge(RecordSink&& other) {
    records.insert(records.end(), other.records.begin(), other.records.end());
  }
};

}  // namespace

std::vector<DetectionRecord> run(const RunConfig& cfg) {
  return run_streaming<RecordSink>(cfg, [] { return RecordSink{}; }).records;
}

}  // namespace hqm
