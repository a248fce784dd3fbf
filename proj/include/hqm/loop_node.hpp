#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hqm/phys_model.hpp"
#include "hqm/rng.hpp"
#include "hqm/time.hpp"

namespace hqm {

enum class SwitchKind { MapIn, MapOutFull, MapOutPartial };

const char* to_string(SwitchKind kind);

/// One Pockels-cell activation. `target` is the photon slot it acts on;
/// `voltage` is only meaningful for MapOutPartial.
struct SwitchEvent {
  TimeNs time{0.0};
  SwitchKind kind = SwitchKind::MapIn;
  int target = 0;
  double voltage = 1.0;

  bool operator==(const SwitchEvent&) const = default;
};

/// A photon slot in the loop. `count` is the number of photons still
/// circulating in the slot; the occupant is alive while count > 0.
struct LoopOccupant {
  int photon_id = 0;
  TimeNs entry_time{0.0};
  std::int64_t cycles_completed = 0;
  std::uint64_t count = 1;
  bool alive = true;
};

struct Emission {
  int photon_id = 0;
  TimeNs time{0.0};
  std::int64_t round = 0;  ///< cycles completed when out-coupled
  std::uint64_t count = 0;
};

class LoopState {
 public:
  explicit LoopState(LoopParams params);

  [[nodiscard]] const LoopParams& params() const { return params_; }
  [[nodiscard]] const std::vector<LoopOccupant>& occupants() const { return occupants_; }
  [[nodiscard]] bool empty() const { return occupants_.empty(); }
  void clear() { occupants_.clear(); }
  [[nodiscard]] const LoopOccupant& occupant(int photon_id) const;

  /// Registers a photon slot. Throws SchedulingError when the phase of t lies
  /// within pc_rise_time (mod tau) of an occupied slot.
  void map_in(int photon_id, TimeNs t, std::uint64_t count = 1);

  /// One round trip for every occupant; each photon survives with probability T.
  void circulate(RngStream& rng);

  /// One round trip for a single occupant.
  const LoopOccupant& pass(int photon_id, RngStream& rng);

  /// Drops a slot without out-coupling it.
  void discard(int photon_id);

  /// Removes the slot and returns its survivors at entry_time + k tau. k must
  /// equal the cycles already completed.
  Emission map_out_full(int photon_id, std::int64_t k);

  /// One pass through the switch at voltage ratio v: each photon leaves with
  /// probability q(v); the rest keep circulating.
  Emission partial_out(int photon_id, double v, RngStream& rng);

  /// Holds the switch at v from the next pass on: circulate then partial_out,
  /// repeated until the slot is empty or max_rounds passes have elapsed. The
  /// slot is removed afterwards. Returns only non-empty emissions.
  std::vector<Emission> chop_out(int photon_id, double v, RngStream& rng, std::int64_t max_rounds = 1000);

 private:
  LoopOccupant& find(int photon_id);
  void remove(int photon_id);

  LoopParams params_;
  std::vector<LoopOccupant> occupants_;
};

/// Grid time entry + k tau evaluated in one step so no rounding accumulates.
TimeNs grid_time(TimeNs entry, std::int64_t k, TimeNs tau);

/// Per-pass out-coupling probability sin^2(pi v / 2).
double outcoupling_probability(double v);

/// Inverse of outcoupling_probability on [0, 1].
double voltage_for_probability(double q);

/// Closed-form P_out(m) = T^m q (1 - q)^(m - 1) for m >= 1.
double chop_emission_probability(double transmission, double q, std::int64_t m);

/// Circular distance between the phases of a and b modulo tau.
double phase_distance(TimeNs a, TimeNs b, TimeNs tau);

enum class ViolationKind { Unsorted, MinSpacing, RiseTime, Structure };

const char* to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::size_t first = 0;   ///< index of the earlier event
  std::size_t second = 0;  ///< index of the offending event
  std::string message;
};

/// Checks a switch schedule against the loop constraints. An empty result
/// means the schedule is valid.
///
///   MinSpacing  two activations of the same kind on the same slot closer
///               than pc_min_spacing
///   RiseTime    an activation within pc_rise_time of the pass phase of
///               another slot that is in the loop at that moment
///   Structure   out-coupling a slot that was never mapped in or is gone
///   Unsorted    events not in time order
std::vector<Violation> validate_sequence(const std::vector<SwitchEvent>& events, const LoopParams& loop);

}  // namespace hqm
