#pragma once

// Domain types shared by every module plus the closed-form click statistics
// that the Monte Carlo engine is checked against.

#include <cstdint>
#include <string>
#include <vector>

#include "hqm/rng.hpp"
#include "hqm/time.hpp"

namespace hqm {

enum class DecayForm { RationalQuadratic, Exponential };

std::string to_string(DecayForm form);
DecayForm decay_form_from_string(const std::string& s);

/// Coefficients of the two decay families.
///
///   RationalQuadratic:  g(t) = 1 + C / (1 + A t + B t^2)   A [1/ns], B [1/ns^2], C [-]
///   Exponential:        g(t) = A exp(-B t)                  A [-],    B [1/ns]
///
/// The same A and B also parameterise the FORD retrieval efficiency
/// eta_ret0 / (1 + A t + B t^2), in which case C is unused.
struct DecayFitParams {
  DecayForm form = DecayForm::RationalQuadratic;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  void validate() const;
  bool operator==(const DecayFitParams&) const = default;
};

/// Documentation-only description of the atomic ensemble. Nothing in the
/// simulation reads these values.
struct FordMetadata {
  double write_detuning_ghz = 0.0;
  double read_detuning_ghz = 4.0;
  double ground_splitting_ghz = 9.2;
  double beam_waist_um = 214.0;
};

struct FordParams {
  double chi = 0.0;         ///< excitation probability per write attempt, [0, 1)
  double eta_stokes = 1.0;  ///< Stokes detection-path efficiency
  double eta_as = 1.0;      ///< anti-Stokes path efficiency (filters, coupling)
  double eta_ret0 = 1.0;    ///< zero-delay retrieval efficiency
  DecayFitParams decay{};   ///< retrieval decay in the FORD storage time
  double bg_stokes = 0.0;   ///< mean background counts per Stokes gate
  double bg_as = 0.0;       ///< mean background counts per anti-Stokes gate (all AS detectors)
  TimeNs pump_duration{1000.0};
  TimeNs write_period{20000.0};
  FordMetadata metadata{};

  void validate() const;
};

struct LoopParams {
  TimeNs period_tau{10.4};
  double transmission_per_cycle = 0.9;
  TimeNs pc_rise_time{5.0};
  TimeNs pc_min_spacing{20000.0};
  double voltage_ratio = 1.0;  ///< V / V_pi applied at map-out

  void validate() const;
  bool operator==(const LoopParams&) const = default;
};

struct ChannelParams {
  double length_m = 0.0;
  double group_velocity = 2.0e8;  ///< metres per second
  double transmission = 1.0;

  [[nodiscard]] TimeNs delay() const;
  void validate(bool allow_zero_length = true) const;
};

/// A g2 value with the raw counts it came from.
struct CorrelationEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::uint64_t n_coinc = 0;
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  std::uint64_t n_trials = 0;
  /// True when no coincidence was observed: value is 0 and std_err is the
  /// one-count upper bound.
  bool upper_bound = false;
};

struct ClickProbabilities {
  double p_stokes = 0.0;
  double p_as = 0.0;
  double p_coinc = 0.0;
};

/// Thermal (single-mode spontaneous Raman) excitation number,
/// P(n) = chi^n / (1 + chi)^(n + 1).
std::uint64_t sample_excitation_number(double chi, RngStream& rng);

/// Probability mass of the thermal distribution.
double thermal_pmf(double chi, std::uint64_t n);

/// Smallest n_max with thermal tail mass P(n > n_max) below 1e-12, capped at 64.
/// Throws NumericError if the cap is reached first.
std::uint64_t thermal_truncation(double chi);

/// FORD retrieval efficiency eta_ret0 / (1 + A t + B t^2) clamped to [0, 1].
double ford_retrieval_efficiency(TimeNs tau1, double eta_ret0, const DecayFitParams& decay);

/// Loop out-coupling efficiency after k round trips, T^k.
double loop_retrieval_efficiency(std::int64_t k_cycles, double transmission);

/// Overall anti-Stokes efficiency from stored excitation to the AS detectors.
double anti_stokes_path_efficiency(const FordParams& ford, TimeNs tau1, std::int64_t loop_cycles,
                                   const LoopParams& loop, const ChannelParams& channel);

/// Exact threshold-detector click probabilities for one heralded-pair trial:
/// a single write attempt, read-out only after a Stokes herald, anti-Stokes
/// detection as the union of both HBT outputs.
ClickProbabilities analytic_click_probs(const FordParams& ford, TimeNs tau1, std::int64_t loop_cycles,
                                        const LoopParams& loop, const ChannelParams& channel);

/// Same joint sum with the anti-Stokes efficiency supplied directly.
ClickProbabilities click_probs_for_efficiency(double chi, double eta_stokes, double bg_stokes,
                                              double eta_as_total, double bg_as);

/// p_coinc / (p_stokes * p_as). Throws UndefinedEstimate on a zero denominator.
double g2_analytic(const ClickProbabilities& probs);

/// Evaluates either decay family at time t (ns).
double g2_decay_model(TimeNs t, const DecayFitParams& params);

/// Product model of the two memories, normalised so joint(tau1, 0) = g2(tau1).
double joint_g2_model(TimeNs tau1, TimeNs tau2, const DecayFitParams& ford_fit,
                      const DecayFitParams& loop_fit);

/// Per-attempt Stokes click probability, 1 - exp(-bg) E[(1 - eta)^n].
double single_attempt_click_probability(double chi, double eta_stokes, double bg_stokes);

}  // namespace hqm
