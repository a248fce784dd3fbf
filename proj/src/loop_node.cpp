#include "hqm/loop_node.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "hqm/errors.hpp"

namespace hqm {

const char* to_string(SwitchKind kind) {
  switch (kind) {
    case SwitchKind::MapIn: return "MAP_IN";
    case SwitchKind::MapOutFull: return "MAP_OUT_FULL";
    case SwitchKind::MapOutPartial: return "MAP_OUT_PARTIAL";
  }
  return "?";
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Unsorted: return "unsorted";
    case ViolationKind::MinSpacing: return "min_spacing";
    case ViolationKind::RiseTime: return "rise_time";
    case ViolationKind::Structure: return "structure";
  }
  return "?";
}

TimeNs grid_time(TimeNs entry, std::int64_t k, TimeNs tau) {
  return TimeNs{entry.value + static_cast<double>(k) * tau.value};
}

double outcoupling_probability(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("voltage ratio must lie in [0, 1]");
  const double s = std::sin(std::numbers::pi * v / 2.0);
  return s * s;
}

double voltage_for_probability(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("out-coupling probability must lie in [0, 1]");
  return 2.0 / std::numbers::pi * std::asin(std::sqrt(q));
}

double chop_emission_probability(double transmission, double q, std::int64_t m) {
  if (m < 1) throw ParameterError("chop round index starts at 1");
  if (!(transmission > 0.0 && transmission <= 1.0)) throw ParameterError("loop transmission must lie in (0, 1]");
  if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("q must lie in [0, 1]");
  const double md = static_cast<double>(m);
  return std::pow(transmission, md) * q * std::pow(1.0 - q, md - 1.0);
}

double phase_distance(TimeNs a, TimeNs b, TimeNs tau) {
  const double d = std::fmod(std::fabs(a.value - b.value), tau.value);
  return std::min(d, tau.value - d);
}

LoopState::LoopState(LoopParams params) : params_(params) { params_.validate(); }

const LoopOccupant& LoopState::occupant(int photon_id) const {
  for (const auto& o : occupants_)
    if (o.photon_id == photon_id) return o;
  throw LookupError("no photon " + std::to_string(photon_id) + " in the loop");
}

LoopOccupant& LoopState::find(int photon_id) {
  for (auto& o : occupants_)
    if (o.photon_id == photon_id) return o;
  throw LookupError("no photon " + std::to_string(photon_id) + " in the loop");
}

void LoopState::remove(int photon_id) {
  std::erase_if(occupants_, [&](const LoopOccupant& o) { return o.photon_id == photon_id; });
}

void LoopState::map_in(int photon_id, TimeNs t, std::uint64_t count) {
  for (const auto& o : occupants_) {
    if (o.photon_id == photon_id) throw SchedulingError("photon " + std::to_string(photon_id) + " already in the loop");
    const double d = phase_distance(t, o.entry_time, params_.period_tau);
    if (d < params_.pc_rise_time.value) {
      std::ostringstream msg;
      msg << "slot collision: photon " << photon_id << " at phase distance " << d << " ns from photon "
          << o.photon_id << " (rise time " << params_.pc_rise_time.value << " ns)";
      throw SlotCollision(msg.str());
    }
  }
  occupants_.push_back({photon_id, t, 0, count, count > 0});
}

void LoopState::circulate(RngStream& rng) {
  for (auto& o : occupants_) {
    o.count = rng.binomial(o.count, params_.transmission_per_cycle);
    o.alive = o.alive && o.count > 0;
    ++o.cycles_completed;
  }
}

const LoopOccupant& LoopState::pass(int photon_id, RngStream& rng) {
  LoopOccupant& o = find(photon_id);
  o.count = rng.binomial(o.count, params_.transmission_per_cycle);
  o.alive = o.alive && o.count > 0;
  ++o.cycles_completed;
  return o;
}

void LoopState::discard(int photon_id) {
  find(photon_id);
  remove(photon_id);
}

Emission LoopState::map_out_full(int photon_id, std::int64_t k) {
  LoopOccupant& o = find(photon_id);
  if (k != o.cycles_completed) {
    throw SchedulingError("map_out_full of photon " + std::to_string(photon_id) + " at k = " + std::to_string(k) +
                          " but it has completed " + std::to_string(o.cycles_completed) + " cycles");
  }
  Emission e{photon_id, grid_time(o.entry_time, k, params_.period_tau), k, o.alive ? o.count : 0};
  remove(photon_id);
  return e;
}

Emission LoopState::partial_out(int photon_id, double v, RngStream& rng) {
  LoopOccupant& o = find(photon_id);
  const double q = outcoupling_probability(v);
  Emission e{photon_id, grid_time(o.entry_time, o.cycles_completed, params_.period_tau), o.cycles_completed, 0};
  e.count = rng.binomial(o.count, q);
  o.count -= e.count;
  o.alive = o.alive && o.count > 0;
  return e;
}

std::vector<Emission> LoopState::chop_out(int photon_id, double v, RngStream& rng, std::int64_t max_rounds) {
  const double q = outcoupling_probability(v);
  std::vector<Emission> out;
  LoopOccupant* o = &find(photon_id);
  for (std::int64_t m = 1; m <= max_rounds && o->count > 0; ++m) {
    o->count = rng.binomial(o->count, params_.transmission_per_cycle);
    ++o->cycles_completed;
    const std::uint64_t n = rng.binomial(o->count, q);
    if (n > 0) {
      out.push_back({photon_id, grid_time(o->entry_time, o->cycles_completed, params_.period_tau), o->cycles_completed, n});
      o->count -= n;
    }
  }
  remove(photon_id);
  return out;
}

std::vector<Violation> validate_sequence(const std::vector<SwitchEvent>& events, const LoopParams& loop) {
  std::vector<Violation> found;
  auto add = [&](ViolationKind kind, std::size_t a, std::size_t b, const std::string& what) {
    std::ostringstream msg;
    msg << to_string(kind) << ": event " << b << " (" << to_string(events[b].kind) << " slot " << events[b].target
        << " at " << events[b].time.value << " ns)";
    if (a != b) msg << " vs event " << a << " (" << to_string(events[a].kind) << " slot " << events[a].target << " at "
                    << events[a].time.value << " ns)";
    msg << ": " << what;
    found.push_back({kind, a, b, msg.str()});
  };

  for (std::size_t i = 1; i < events.size(); ++i)
    if (events[i].time < events[i - 1].time) add(ViolationKind::Unsorted, i - 1, i, "events are not time-sorted");

  // Lifetime of each slot: from its MAP_IN to its last MAP_OUT_FULL (or the
  // end of the schedule if it is never fully mapped out).
  struct Slot {
    std::size_t map_in;
    TimeNs entry;
    TimeNs leave;
  };
  std::map<int, Slot> slots;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (ev.kind == SwitchKind::MapOutPartial && !(ev.voltage >= 0.0 && ev.voltage <= 1.0))
      add(ViolationKind::Structure, i, i, "partial map-out voltage outside [0, 1]");
    auto it = slots.find(ev.target);
    if (ev.kind == SwitchKind::MapIn) {
      if (it != slots.end()) {
        add(ViolationKind::Structure, it->second.map_in, i, "slot mapped in twice");
        continue;
      }
      slots.emplace(ev.target, Slot{i, ev.time, TimeNs{INFINITY}});
      continue;
    }
    if (it == slots.end()) {
      add(ViolationKind::Structure, i, i, "out-coupling a slot that was never mapped in");
      continue;
    }
    if (ev.time < it->second.entry) add(ViolationKind::Structure, it->second.map_in, i, "out-coupling before map-in");
    if (ev.time > it->second.leave) add(ViolationKind::Structure, i, i, "out-coupling after the slot was emptied");
    if (ev.kind == SwitchKind::MapOutFull && std::isinf(it->second.leave.value)) it->second.leave = ev.time;
  }

  for (std::size_t i = 0; i < events.size(); ++i) {
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      const auto& a = events[i];
      const auto& b = events[j];
      if (a.target == b.target && a.kind == b.kind &&
          std::fabs(b.time.value - a.time.value) < loop.pc_min_spacing.value) {
        std::ostringstream what;
        what << "separation " << std::fabs(b.time.value - a.time.value) << " ns < pc_min_spacing "
             << loop.pc_min_spacing.value << " ns";
        add(ViolationKind::MinSpacing, i, j, what.str());
      }
    }
  }

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    for (const auto& [target, slot] : slots) {
      if (target == ev.target) continue;
      if (ev.time < slot.entry || ev.time > slot.leave) continue;
      const double d = phase_distance(ev.time, slot.entry, loop.period_tau);
      if (d < loop.pc_rise_time.value) {
        std::ostringstream what;
        what << "within " << d << " ns of the pass phase of slot " << target << " (rise time "
             << loop.pc_rise_time.value << " ns)";
        add(ViolationKind::RiseTime, slot.map_in, i, what.str());
      }
    }
  }
  return found;
}

}  // namespace hqm
