#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hqm/netsim.hpp"
#include "hqm/phys_model.hpp"
#include "hqm/time.hpp"

namespace hqm {

/// A time window on a set of detectors. A trial "clicks" in the window when
/// any of its records falls on one of the detectors within
/// [center - width/2, center + width/2).
struct WindowSpec {
  std::uint32_t detectors = 0;
  TimeNs center{0.0};
  TimeNs width{4.0};
  std::string label;

  [[nodiscard]] bool contains(const DetectionRecord& r) const {
    return (detectors & detector_bit(r.detector)) != 0 && r.time.value >= center.value - width.value / 2.0 &&
           r.time.value < center.value + width.value / 2.0;
  }
  void validate() const;

  static WindowSpec from_gate(const Gate& g);
  /// The same window restricted to one detector.
  [[nodiscard]] WindowSpec on(Detector d) const;
};

/// g2 = N_c N / (N_a N_b) with std_err = g2 sqrt(1/N_c + 1/N_a + 1/N_b).
/// N_c = 0 gives value 0 with the one-count bound as std_err.
/// Throws UndefinedEstimate when N_a or N_b is zero.
CorrelationEstimate g2_from_counts(std::uint64_t n_coinc, std::uint64_t n_a, std::uint64_t n_b,
                                   std::uint64_t n_trials);

/// Per-trial coincidence estimator over records sorted by trial_id.
CorrelationEstimate g2_cross(std::span<const DetectionRecord> records, const WindowSpec& win_a,
                             const WindowSpec& win_b, std::uint64_t n_trials);

/// Auto-correlation of the two splitter outputs in one temporal window.
/// `win` must cover both AS_A and AS_B.
CorrelationEstimate g2_auto(std::span<const DetectionRecord> records, const WindowSpec& win, std::uint64_t n_trials);

/// g2_auto restricted to trials with a click in `herald`.
CorrelationEstimate g2_auto_heralded(std::span<const DetectionRecord> records, const WindowSpec& herald,
                                     const WindowSpec& win);

/// Streaming coincidence counts for several window pairs; usable as a
/// run_streaming accumulator.
class CoincidenceCounter {
 public:
  CoincidenceCounter() = default;
  explicit CoincidenceCounter(std::vector<std::pair<WindowSpec, WindowSpec>> pairs);

  void add(std::uint64_t trial_id, std::span<const DetectionRecord> records);
  void merge(CoincidenceCounter&& other);

  [[nodiscard]] std::size_t size() const { return pairs_.size(); }
  [[nodiscard]] std::uint64_t trials() const { return trials_; }
  [[nodiscard]] CorrelationEstimate estimate(std::size_t i) const;
  [[nodiscard]] std::uint64_t n_a(std::size_t i) const { return counts_[i].a; }
  [[nodiscard]] std::uint64_t n_b(std::size_t i) const { return counts_[i].b; }
  [[nodiscard]] std::uint64_t n_coinc(std::size_t i) const { return counts_[i].c; }

 private:
  struct Counts {
    std::uint64_t a = 0, b = 0, c = 0;
  };
  std::vector<std::pair<WindowSpec, WindowSpec>> pairs_;
  std::vector<Counts> counts_;
  std::uint64_t trials_ = 0;
};

struct CSTestResult {
  double ratio = 0.0;   ///< g_sas^2 / (g_ss g_asas)
  double excess = 0.0;  ///< g_sas^2 - g_ss g_asas
  double sigma = 0.0;   ///< excess in units of its propagated standard error
  bool violated = false;
};

CSTestResult cauchy_schwarz(const CorrelationEstimate& g_sas, const CorrelationEstimate& g_ss,
                            const CorrelationEstimate& g_asas);

/// True iff g.value > 6.
bool bell_threshold(const CorrelationEstimate& g);

struct DecaySample {
  double t = 0.0;  ///< ns
  double g2 = 0.0;
  double err = 0.0;
};

struct DecayFitResult {
  DecayFitParams params;
  double chi2 = 0.0;
  int dof = 0;
  double reduced_chi2 = 0.0;
  std::vector<double> std_errors;               ///< A, B[, C]
  std::vector<std::vector<double>> covariance;  ///< (J^T W J)^-1
  int starts = 0;
  int converged_starts = 0;
};

/// Weighted least-squares fit of a decay form with a 16-start
/// Levenberg-Marquardt search. Deterministic for a given seed.
/// Throws ParameterError on bad input and FitFailure when no start converges.
DecayFitResult fit_decay(std::span<const DecaySample> samples, DecayForm form, std::uint64_t seed = 0);

enum class LifetimeConvention { Peak, Excess };

std::string to_string(LifetimeConvention c);

/// Time at which the curve falls to 1/e of its peak (Peak) or its excess
/// over 1 falls to 1/e (Excess). Bisection to 1e-4 ns; NoCrossingError if
/// the target is never reached before t_max.
TimeNs lifetime_1e(const DecayFitParams& params, LifetimeConvention convention = LifetimeConvention::Peak,
                   TimeNs t_max = TimeNs{1e9});

struct Histogram {
  double start = 0.0;      ///< left edge of the first bin, ns
  double bin_width = 0.1;  ///< ns
  std::vector<double> counts;

  [[nodiscard]] double center(std::size_t i) const { return start + (static_cast<double>(i) + 0.5) * bin_width; }
};

struct PulseFit {
  TimeNs fwhm{0.0};
  TimeNs center{0.0};
  double amplitude = 0.0;
  bool upper_bound = false;  ///< single occupied bin: fwhm is the bin width
  bool multi_peak = false;   ///< more than one significant local maximum
};

/// Gaussian least-squares fit of an arrival-time histogram;
/// FWHM = 2 sqrt(2 ln 2) sigma.
PulseFit pulse_duration_fit(const Histogram& h);

/// Photon bandwidth under Gaussian convolution, sqrt(scan^2 - cavity^2).
/// Throws UnphysicalInput unless scan > cavity > 0.
double bandwidth_deconvolve(double scan_fwhm_mhz, double cavity_fwhm_mhz);

}  // namespace hqm
