#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hqm/ford_node.hpp"
#include "hqm/loop_node.hpp"
#include "hqm/phys_model.hpp"
#include "hqm/time.hpp"

namespace hqm {

enum class ChainOp { Fifo, Filo, Combine, Split, Chop, ChopFifo, ChopFilo, FineTune };

std::string to_string(ChainOp op);
ChainOp chain_op_from_string(const std::string& s);

/// A requested two-photon chain operation. Times are measured at the loop:
///   t3  arrival of AS2 minus arrival of AS1
///   t4  first output of AS2 minus output of AS1 (negative = reversed order)
///   t5  second chopped part minus the output pulse just before it
struct ChainRequest {
  ChainOp operation = ChainOp::Fifo;
  TimeNs target_t3{10.0};
  TimeNs target_t4{10.0};
  std::optional<TimeNs> target_t5;
  /// First-part : second-part probability ratio of the chopped photon.
  std::optional<std::pair<double, double>> chop_ratio;
  /// Source-side shift for FineTune requests; a multiple of the step.
  TimeNs fine_tune_delta{0.0};
};

/// Fixed timing of the two-photon source sequence.
struct ChainConstants {
  TimeNs t1{565.5};                  ///< FORD storage after the last write slot
  TimeNs direct_path_offset{21.5};   ///< optical path of the direct route to the loop
  std::int64_t base_cycles = 2;      ///< cycles spent by the photon that leaves first
  TimeNs fine_tune_step{2.0};
  FeedbackConfig feedback{10, TimeNs{108.0}, TimeNs{21600.0}};
  std::int64_t max_chop_gap = 10;

  bool operator==(const ChainConstants&) const = default;
};

struct ChainRoute {
  bool as1_via_fiber = true;
  bool as2_via_fiber = false;
  TimeNs fiber_delay{2500.0};
  double fiber_transmission = 1.0;
  TimeNs direct_path_offset{21.5};

  bool operator==(const ChainRoute&) const = default;
};

/// One output temporal mode of the loop. `time` is relative to the arrival
/// of AS1 at the loop; `fraction` is the out-coupled share of the photon
/// before circulation loss.
struct OutputMode {
  std::string label;
  int photon = 1;
  TimeNs time{0.0};
  std::int64_t cycles = 0;
  double fraction = 1.0;

  bool operator==(const OutputMode&) const = default;
};

struct ChainPlan {
  ChainOp operation = ChainOp::Fifo;
  ChainConstants constants{};
  TimeNs t1{0.0};
  TimeNs t2{0.0};
  TimeNs pump_duration{1000.0};  ///< of the FORD node the plan was compiled for
  ChainRoute route{};
  std::int64_t k1 = 0;
  std::int64_t k2 = 0;
  int chopped_photon = 0;     ///< 0 none, 1 AS1, 2 AS2
  std::int64_t chop_gap = 0;  ///< cycles between the two chopped parts
  double chop_q = 1.0;        ///< out-coupling probability of the first part
  std::vector<double> voltages;
  TimeNs base_t3{0.0};  ///< requested t3 before fine tuning
  TimeNs base_t4{0.0};
  TimeNs target_t3{0.0};
  TimeNs target_t4{0.0};
  std::optional<TimeNs> target_t5;
  TimeNs achieved_t3{0.0};
  TimeNs achieved_t4{0.0};
  std::optional<TimeNs> achieved_t5;
  TimeNs residual{0.0};  ///< target_t4 - achieved_t4
  std::optional<TimeNs> residual_t5;
  std::int64_t fine_tune_steps = 0;
  std::vector<SwitchEvent> events;
  std::vector<OutputMode> modes;
  std::vector<std::string> warnings;
  LoopParams loop{};

  bool operator==(const ChainPlan&) const = default;
};

/// Compiles a request into a validated switch schedule. `channel` is the
/// switchable delay fiber taken by AS1.
///
/// Throws UnreachableOrdering, SlotCollision or SwitchConstraintViolation.
ChainPlan plan(const ChainRequest& request, const LoopParams& loop, const FordParams& ford,
               const ChannelParams& channel, const ChainConstants& constants = {});

/// Shifts the source-side interval t2 by delta. The loop cycle counts stay
/// fixed; the AS2 switch times and all t2-derived quantities move by delta.
/// Throws QuantizationError when delta is not a whole number of steps.
ChainPlan fine_tune(const ChainPlan& p, TimeNs delta, TimeNs step = TimeNs{2.0});

struct ModePrediction {
  std::string label;
  int photon = 1;
  TimeNs time{0.0};
  /// Probability that a stored excitation reaches the detectors in this mode.
  double emission_probability = 0.0;
};

struct PairPrediction {
  int herald = 1;  ///< 1 for S1, 2 for S2
  std::string mode;
  double g2 = 1.0;
  ClickProbabilities probs{};
};

struct ChainPrediction {
  std::vector<ModePrediction> modes;
  std::vector<PairPrediction> pairs;
  double herald_probability = 0.0;  ///< per period, with feedback

  [[nodiscard]] const PairPrediction& pair(int herald, const std::string& mode) const;
};

/// Analytic outcome of a chain plan. `channel` is the lumped link between
/// the memories (applied to both photons).
ChainPrediction predict_outcomes(const ChainPlan& p, const FordParams& ford, const LoopParams& loop,
                                 const ChannelParams& channel);

/// Storage time of the excitation heralded at write attempt `attempt` of a
/// period when the read pulse comes at the fixed time after the last slot.
TimeNs chain_storage_time(const ChainPlan& p, int photon, int attempt);

/// Exact click statistics for one feedback period with a fixed read time:
/// the herald may come from any attempt and the storage time depends on it.
/// `eta_by_attempt[i]` is the overall anti-Stokes efficiency for a herald at
/// attempt i.
ClickProbabilities feedback_click_probs(double chi, double eta_stokes, double bg_stokes,
                                        const std::vector<double>& eta_by_attempt, double bg_as);

/// The twelve reference chain operations with their tabulated timings.
struct Table1Row {
  std::string name;
  ChainRequest request;
  TimeNs t1, t2, t3, t4;
  std::optional<TimeNs> t5;
};

const std::vector<Table1Row>& table1_rows();

}  // namespace hqm
