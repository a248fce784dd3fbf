#pragma once

#include <cstdint>
#include <optional>

#include "hqm/phys_model.hpp"
#include "hqm/rng.hpp"
#include "hqm/time.hpp"

namespace hqm {

enum class FordPhase { Idle, Pumped, Excited, ReadOut };

const char* to_string(FordPhase phase);

struct FordState {
  FordPhase phase = FordPhase::Idle;
  std::uint64_t excitation_count = 0;
  std::optional<TimeNs> herald_time;
  int attempt_index = 0;
  TimeNs clock{0.0};  ///< node-local time of the next action
};

struct FeedbackConfig {
  int max_attempts = 1;
  TimeNs attempt_spacing{108.0};
  TimeNs period{21600.0};

  /// Checks max_attempts * attempt_spacing <= period - pump_duration.
  void validate(const FordParams& ford) const;

  bool operator==(const FeedbackConfig&) const = default;
};

struct WriteOutcome {
  FordState state;
  bool stokes_click = false;
};

struct FeedbackOutcome {
  FordState state;
  int attempts_used = 0;
  bool success = false;
};

struct ReadOutcome {
  FordState state;
  std::uint64_t anti_stokes_emitted = 0;
  TimeNs emission_time{0.0};
};

/// IDLE, READ_OUT or PUMPED -> PUMPED. Clears the stored excitation and
/// advances the clock by the pump duration.
FordState pump(FordState state, const FordParams& ford);

/// One write pulse at state.clock. The sampled excitation number replaces any
/// unheralded excitation left by an earlier attempt.
WriteOutcome write_attempt(FordState state, const FordParams& ford, RngStream& rng);

/// Repeat-until-success: write attempts spaced by cfg.attempt_spacing, halting
/// at the first Stokes click or after cfg.max_attempts.
FeedbackOutcome feedback_until_success(FordState state, const FordParams& ford, const FeedbackConfig& cfg,
                                       RngStream& rng);

/// Converts each stored excitation with probability ford_retrieval_efficiency(tau1).
/// The emission happens at herald_time + tau1.
ReadOutcome read_out(FordState state, const FordParams& ford, TimeNs tau1, RngStream& rng);

/// Drops a stored excitation without reading it (any phase -> IDLE).
FordState discard(FordState state);

/// 1 - (1 - p1)^m.
double feedback_success_probability(double p1, int max_attempts);

/// (1 - (1 - p1)^m) / p1, the rate gain over a single attempt.
double feedback_enhancement(double p1, int max_attempts);

}  // namespace hqm
