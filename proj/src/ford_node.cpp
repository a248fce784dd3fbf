#include "hqm/ford_node.hpp"

#include <cmath>
#include <string>

#include "hqm/errors.hpp"

namespace hqm {

const char* to_string(FordPhase phase) {
  switch (phase) {
    case FordPhase::Idle: return "IDLE";
    case FordPhase::Pumped: return "PUMPED";
    case FordPhase::Excited: return "EXCITED";
    case FordPhase::ReadOut: return "READ_OUT";
  }
  return "?";
}

void FeedbackConfig::validate(const FordParams& ford) const {
  if (max_attempts < 1) throw ParameterError("feedback max_attempts must be >= 1");
  if (!attempt_spacing.finite() || attempt_spacing.value < 0.0) throw ParameterError("attempt_spacing must be >= 0");
  if (!period.finite() || period.value <= 0.0) throw ParameterError("feedback period must be > 0");
  if (attempt_spacing.value * max_attempts > period.value - ford.pump_duration.value)
    throw ParameterError("max_attempts * attempt_spacing exceeds period - pump_duration");
}

FordState pump(FordState state, const FordParams& ford) {
  if (state.phase == FordPhase::Excited)
    throw SequencingError("pump while EXCITED: read out or discard the stored excitation first");
  state.phase = FordPhase::Pumped;
  state.excitation_count = 0;
  state.herald_time.reset();
  state.attempt_index = 0;
  state.clock += ford.pump_duration;
  return state;
}

WriteOutcome write_attempt(FordState state, const FordParams& ford, RngStream& rng) {
  if (state.phase != FordPhase::Pumped)
    throw SequencingError(std::string("write_attempt requires PUMPED, node is ") + to_string(state.phase));
  const std::uint64_t n = sample_excitation_number(ford.chi, rng);
  const std::uint64_t detected = rng.binomial(n, ford.eta_stokes);
  const bool background = rng.poisson(ford.bg_stokes) > 0;
  const bool click = detected > 0 || background;

  state.excitation_count = n;
  ++state.attempt_index;
  if (click) {
    state.phase = FordPhase::Excited;
    state.herald_time = state.clock;
  }
  return {state, click};
}

FeedbackOutcome feedback_until_success(FordState state, const FordParams& ford, const FeedbackConfig& cfg,
                                       RngStream& rng) {
  if (state.phase != FordPhase::Pumped)
    throw SequencingError(std::string("feedback requires PUMPED, node is ") + to_string(state.phase));
  if (cfg.max_attempts < 1) throw ParameterError("feedback max_attempts must be >= 1");
  FeedbackOutcome out;
  for (int i = 0; i < cfg.max_attempts; ++i) {
    if (i > 0) state.clock += cfg.attempt_spacing;
    auto [next, click] = write_attempt(state, ford, rng);
    state = next;
    out.attempts_used = i + 1;
    if (click) {
      out.success = true;
      break;
    }
  }
  out.state = state;
  return out;
}

ReadOutcome read_out(FordState state, const FordParams& ford, TimeNs tau1, RngStream& rng) {
  if (state.phase != FordPhase::Excited || !state.herald_time)
    throw SequencingError(std::string("read_out requires a heralded excitation, node is ") + to_string(state.phase));
  if (!(tau1.value >= 0.0)) throw ParameterError("tau1 must be >= 0");
  const double eta = ford_retrieval_efficiency(tau1, ford.eta_ret0, ford.decay);
  ReadOutcome out;
  out.anti_stokes_emitted = rng.binomial(state.excitation_count, eta);
  out.emission_time = *state.herald_time + tau1;
  state.phase = FordPhase::ReadOut;
  state.excitation_count = 0;
  state.clock = out.emission_time;
  out.state = state;
  return out;
}

FordState discard(FordState state) {
  state.phase = FordPhase::Idle;
  state.excitation_count = 0;
  state.herald_time.reset();
  state.attempt_index = 0;
  return state;
}

double feedback_success_probability(double p1, int max_attempts) {
  if (!(p1 >= 0.0 && p1 <= 1.0)) throw ParameterError("p1 must lie in [0, 1]");
  if (max_attempts < 1) throw ParameterError("max_attempts must be >= 1");
  return -std::expm1(max_attempts * std::log1p(-p1));
}

double feedback_enhancement(double p1, int max_attempts) {
  if (p1 == 0.0) return static_cast<double>(max_attempts);
  return feedback_success_probability(p1, max_attempts) / p1;
}

}  // namespace hqm
