#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "hqm/chainplan.hpp"
#include "hqm/ford_node.hpp"
#include "hqm/loop_node.hpp"
#include "hqm/phys_model.hpp"
#include "hqm/time.hpp"

namespace hqm {

enum class Detector : std::uint8_t { S = 0, AS_A = 1, AS_B = 2, AUX = 3 };

const char* to_string(Detector d);
Detector detector_from_string(const std::string& s);

/// Bit mask over Detector values.
constexpr std::uint32_t detector_bit(Detector d) { return 1u << static_cast<unsigned>(d); }
constexpr std::uint32_t kAntiStokesMask = detector_bit(Detector::AS_A) | detector_bit(Detector::AS_B);

struct DetectionRecord {
  std::uint64_t trial_id = 0;
  Detector detector = Detector::S;
  TimeNs time{0.0};

  bool operator==(const DetectionRecord&) const = default;
};

enum class EventKind : std::uint8_t { Pump, WriteAttempt, Read, LoopArrive, LoopPass, LoopSwitch, DetectorArrive };

struct Event {
  TimeNs time{0.0};
  std::uint64_t sequence_no = 0;
  EventKind kind = EventKind::Pump;
  int photon = 0;
  std::uint64_t count = 0;
  int attempt = 0;
};

/// Min-queue ordered by (time, sequence_no). Sequence numbers are assigned on
/// push, so events scheduled for the same instant run in scheduling order.
class EventQueue {
 public:
  void push(TimeNs time, EventKind kind, int photon = 0, std::uint64_t count = 0, int attempt = 0);
  Event pop();
  [[nodiscard]] bool empty() const { return heap_.empty(); }
  [[nodiscard]] std::size_t size() const { return heap_.size(); }
  void clear();

 private:
  std::vector<Event> heap_;
  std::uint64_t next_seq_ = 0;
};

struct Topology {
  bool loop = true;  ///< anti-Stokes photons pass through the loop memory
  bool hbt = true;   ///< 50:50 splitter onto AS_A / AS_B; otherwise AS_A only
};

/// Single heralded pair per trial: read at herald + tau1, then the link and
/// loop_cycles round trips. With loop.voltage_ratio < 1 the switch is held at
/// that voltage for passes 1..loop_cycles (one gate per pass).
struct PairTiming {
  TimeNs tau1{30.0};
  std::int64_t loop_cycles = 0;
  bool use_delay_fiber = false;
};

/// Two photons from consecutive feedback periods, scheduled by a chain plan.
struct ChainTiming {
  ChainPlan plan;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::uint64_t n_trials = 1;
  FordParams ford{};
  LoopParams loop{};
  ChannelParams channel{};                            ///< link from FORD to the loop
  ChannelParams delay_fiber{500.0, 2.0e8, 1.0};       ///< switchable extra path
  FeedbackConfig feedback{};
  Topology topology{};
  std::variant<PairTiming, ChainTiming> timing = PairTiming{};
  TimeNs gate_width{4.0};
  double pulse_fwhm_ns = 1.6;  ///< carried as metadata, not simulated
  unsigned threads = 0;        ///< 0: HQM_THREADS or hardware concurrency

  /// Throws ParameterError / SwitchConstraintViolation before any trial runs.
  void validate() const;
};

/// A detection gate of the scenario. Background clicks are drawn once per
/// gate and detector; photons count toward the gate that contains them.
struct Gate {
  std::string label;
  std::uint32_t detectors = 0;
  TimeNs center{0.0};
  TimeNs width{0.0};
  double background_per_detector = 0.0;

  [[nodiscard]] bool contains(TimeNs t) const {
    return t.value >= center.value - width.value / 2.0 && t.value < center.value + width.value / 2.0;
  }
};

/// Gates of the scenario in time order. Stokes gates are aggregated into one
/// window per period ("S" or "S1"/"S2"); anti-Stokes gates are labelled by mode.
std::vector<Gate> scenario_gates(const RunConfig& cfg);

/// Gate lookup by label. Throws LookupError.
Gate gate_by_label(const RunConfig& cfg, const std::string& label);

/// Extra delay and survival probability of the path selection stage.
struct PathSelection {
  TimeNs delay{0.0};
  double transmission = 1.0;
};

PathSelection route_path_selection(bool use_delay_fiber, const ChannelParams& delay_fiber);

/// Routes each of `photons` to AS_A with probability 1/2. Returns the AS_A count.
std::uint64_t hbt_split(std::uint64_t photons, RngStream& rng);

/// Worker count: cfg.threads, else HQM_THREADS, else hardware concurrency.
unsigned resolve_threads(unsigned requested);

/// Simulates trials one at a time. Holds reusable buffers; one per thread.
class TrialEngine {
 public:
  explicit TrialEngine(const RunConfig& cfg);
  ~TrialEngine();
  TrialEngine(TrialEngine&&) noexcept;
  TrialEngine& operator=(TrialEngine&&) noexcept;

  /// Appends the trial's records sorted by (time, detector).
  void run_trial(std::uint64_t trial_id, std::vector<DetectionRecord>& out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Streams every trial through an accumulator. Trials are split into
/// contiguous chunks, one per worker; each worker gets its own accumulator
/// from `make` and the accumulators are merged in chunk order, so the result
/// does not depend on the thread count.
///
/// Acc must provide `void add(std::uint64_t trial_id, std::span<const DetectionRecord>)`
/// and `void merge(Acc&&)`.
template <class Acc, class Factory>
Acc run_streaming(const RunConfig& cfg, Factory make) {
  cfg.validate();
  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(cfg.threads), cfg.n_trials));
  std::vector<Acc> accs;
  accs.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) accs.push_back(make());

  auto work = [&](unsigned w) {
    const std::uint64_t begin = cfg.n_trials * w / workers;
    const std::uint64_t end = cfg.n_trials * (w + 1) / workers;
    TrialEngine engine(cfg);
    std::vector<DetectionRecord> buf;
    for (std::uint64_t t = begin; t < end; ++t) {
      buf.clear();
      engine.run_trial(t, buf);
      accs[w].add(t, std::span<const DetectionRecord>(buf));
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  for (unsigned w = 1; w < workers; ++w) accs[0].merge(std::move(accs[w]));
  return std::move(accs[0]);
}

/// All records of the run sorted by (trial_id, time).
std::vector<DetectionRecord> run(const RunConfig& cfg);

}  // namespace hqm
