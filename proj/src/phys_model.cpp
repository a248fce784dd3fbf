#include "hqm/phys_model.hpp"

#include <algorithm>
#include <cmath>

#include "hqm/errors.hpp"

namespace hqm {

namespace {

constexpr double kTailTolerance = 1e-12;
constexpr std::uint64_t kTruncationCap = 64;

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError(std::string(name) + " must lie in [0, 1]");
}

void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be finite and >= 0");
}

void require_chi(double chi) {
  if (!(chi >= 0.0 && chi < 1.0)) throw ParameterError("chi must lie in [0, 1)");
}

}  // namespace

std::string to_string(DecayForm form) {
  return form == DecayForm::RationalQuadratic ? "rational_quadratic" : "exponential";
}

DecayForm decay_form_from_string(const std::string& s) {
  if (s == "rational_quadratic" || s == "RATIONAL_QUADRATIC" || s == "rational" || s == "rq") return DecayForm::RationalQuadratic;
  if (s == "exponential" || s == "EXPONENTIAL" || s == "exp") return DecayForm::Exponential;
  throw ParameterError("unknown decay form '" + s + "'");
}

void DecayFitParams::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) throw ParameterError("decay coefficients must be finite");
  if (a < 0.0 || b < 0.0) throw ParameterError("decay coefficients A and B must be >= 0 for a non-increasing curve");
  if (form == DecayForm::RationalQuadratic && c < 0.0) throw ParameterError("rational-quadratic C must be >= 0");
}

void FordParams::validate() const {
  require_chi(chi);
  require_probability(eta_stokes, "eta_stokes");
  require_probability(eta_as, "eta_as");
  require_probability(eta_ret0, "eta_ret0");
  require_non_negative(bg_stokes, "bg_stokes");
  require_non_negative(bg_as, "bg_as");
  if (decay.form != DecayForm::RationalQuadratic) throw ParameterError("FORD retrieval decay must be rational-quadratic");
  decay.validate();
  if (!pump_duration.finite() || pump_duration.value < 0.0) throw ParameterError("pump_duration must be >= 0");
  if (!write_period.finite() || write_period.value <= 0.0) throw ParameterError("write_period must be > 0");
}

void LoopParams::validate() const {
  if (!(transmission_per_cycle > 0.0 && transmission_per_cycle <= 1.0))
    throw ParameterError("loop transmission per cycle must lie in (0, 1]");
  if (!period_tau.finite() || !(period_tau > pc_rise_time)) throw ParameterError("loop period must exceed the Pockels-cell rise time");
  if (!pc_rise_time.finite() || pc_rise_time.value < 0.0) throw ParameterError("pc_rise_time must be >= 0");
  if (!pc_min_spacing.finite() || pc_min_spacing.value < 0.0) throw ParameterError("pc_min_spacing must be >= 0");
  require_probability(voltage_ratio, "voltage_ratio");
}

TimeNs ChannelParams::delay() const {
  // length * 1e9 / v keeps round values exact (500 m at 2e8 m/s is exactly 2500 ns).
  return TimeNs{length_m * 1e9 / group_velocity};
}

void ChannelParams::validate(bool allow_zero_length) const {
  require_probability(transmission, "channel transmission");
  if (!(group_velocity > 0.0) || !std::isfinite(group_velocity)) throw ParameterError("group velocity must be > 0");
  if (!std::isfinite(length_m) || length_m < 0.0 || (!allow_zero_length && length_m == 0.0))
    throw ParameterError("channel length must be positive");
}

double thermal_pmf(double chi, std::uint64_t n) {
  require_chi(chi);
  if (chi == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::pow(chi / (1.0 + chi), static_cast<double>(n)) / (1.0 + chi);
}

std::uint64_t thermal_truncation(double chi) {
  require_chi(chi);
  if (chi == 0.0) return 0;
  const double ratio = chi / (1.0 + chi);
  double tail = ratio;  // P(n > 0)
  for (std::uint64_t n = 0; n <= kTruncationCap; ++n) {
    if (tail < kTailTolerance) return n;
    tail *= ratio;
  }
  throw NumericError("thermal sum did not converge below 1e-12 within n_max = " + std::to_string(kTruncationCap));
}

std::uint64_t sample_excitation_number(double chi, RngStream& rng) {
  require_chi(chi);
  if (chi == 0.0) return 0;
  return rng.geometric(chi / (1.0 + chi));
}

double ford_retrieval_efficiency(TimeNs tau1, double eta_ret0, const DecayFitParams& decay) {
  if (!(tau1.value >= 0.0)) throw ParameterError("tau1 must be >= 0");
  require_probability(eta_ret0, "eta_ret0");
  const double t = tau1.value;
  const double denom = 1.0 + decay.a * t + decay.b * t * t;
  return std::clamp(eta_ret0 / denom, 0.0, 1.0);
}

double loop_retrieval_efficiency(std::int64_t k_cycles, double transmission) {
  if (k_cycles < 0) throw ParameterError("loop cycle count must be >= 0");
  if (!(transmission > 0.0 && transmission <= 1.0)) throw ParameterError("loop transmission must lie in (0, 1]");
  return std::pow(transmission, static_cast<double>(k_cycles));
}

double anti_stokes_path_efficiency(const FordParams& ford, TimeNs tau1, std::int64_t loop_cycles,
                                   const LoopParams& loop, const ChannelParams& channel) {
  return ford.eta_as * ford_retrieval_efficiency(tau1, ford.eta_ret0, ford.decay) * channel.transmission *
         loop_retrieval_efficiency(loop_cycles, loop.transmission_per_cycle);
}

double single_attempt_click_probability(double chi, double eta_stokes, double bg_stokes) {
  require_chi(chi);
  require_probability(eta_stokes, "eta_stokes");
  require_non_negative(bg_stokes, "bg_stokes");
  const std::uint64_t n_max = thermal_truncation(chi);
  double no_click = 0.0;
  for (std::uint64_t n = 0; n <= n_max; ++n)
    no_click += thermal_pmf(chi, n) * std::pow(1.0 - eta_stokes, static_cast<double>(n));
  return 1.0 - std::exp(-bg_stokes) * no_click;
}

ClickProbabilities click_probs_for_efficiency(double chi, double eta_stokes, double bg_stokes,
                                              double eta_as_total, double bg_as) {
  require_chi(chi);
  require_probability(eta_stokes, "eta_stokes");
  require_probability(eta_as_total, "anti-Stokes efficiency");
  require_non_negative(bg_stokes, "bg_stokes");
  require_non_negative(bg_as, "bg_as");

  const std::uint64_t n_max = thermal_truncation(chi);
  const double quiet_s = std::exp(-bg_stokes);
  const double quiet_as = std::exp(-bg_as);

  // Conditioned on n excitations the Stokes click and the retrieved
  // anti-Stokes click are independent; the read pulse fires only after a
  // herald, so unheralded trials see anti-Stokes background alone.
  ClickProbabilities out;
  for (std::uint64_t n = 0; n <= n_max; ++n) {
    const double p_n = thermal_pmf(chi, n);
    const double nd = static_cast<double>(n);
    const double s_click = 1.0 - quiet_s * std::pow(1.0 - eta_stokes, nd);
    const double as_click = 1.0 - quiet_as * std::pow(1.0 - eta_as_total, nd);
    out.p_stokes += p_n * s_click;
    out.p_coinc += p_n * s_click * as_click;
  }
  out.p_as = out.p_coinc + (1.0 - out.p_stokes) * (1.0 - quiet_as);
  return out;
}

ClickProbabilities analytic_click_probs(const FordParams& ford, TimeNs tau1, std::int64_t loop_cycles,
                                        const LoopParams& loop, const ChannelParams& channel) {
  ford.validate();
  loop.validate();
  channel.validate();
  if (loop_cycles < 0) throw ParameterError("loop_cycles must be >= 0");
  const double eta = anti_stokes_path_efficiency(ford, tau1, loop_cycles, loop, channel);
  return click_probs_for_efficiency(ford.chi, ford.eta_stokes, ford.bg_stokes, eta, ford.bg_as);
}

double g2_analytic(const ClickProbabilities& probs) {
  const double denom = probs.p_stokes * probs.p_as;
  if (!(denom > 0.0)) throw UndefinedEstimate("g2 undefined: a marginal click probability is zero");
  return probs.p_coinc / denom;
}

double g2_decay_model(TimeNs t, const DecayFitParams& params) {
  if (!(t.value >= 0.0)) throw ParameterError("decay-model time must be >= 0");
  const double x = t.value;
  switch (params.form) {
    case DecayForm::RationalQuadratic:
      return 1.0 + params.c / (1.0 + params.a * x + params.b * x * x);
    case DecayForm::Exponential:
      return params.a * std::exp(-params.b * x);
  }
  throw ParameterError("unknown decay form");
}

double joint_g2_model(TimeNs tau1, TimeNs tau2, const DecayFitParams& ford_fit, const DecayFitParams& loop_fit) {
  if (ford_fit.form != DecayForm::RationalQuadratic) throw ParameterError("joint model: FORD fit must be rational-quadratic");
  if (loop_fit.form != DecayForm::Exponential) throw ParameterError("joint model: loop fit must be exponential");
  if (loop_fit.a == 0.0) throw UndefinedEstimate("joint model undefined for loop fit amplitude A = 0");
  return g2_decay_model(tau1, ford_fit) * g2_decay_model(tau2, loop_fit) / loop_fit.a;
}

}  // namespace hqm
