#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hqm/chainplan.hpp"
#include "hqm/estimators.hpp"
#include "hqm/netsim.hpp"

namespace hqm {

inline constexpr int kSchemaVersion = 1;

const char* artifact_version();

/// Sweep axes of a scenario. The points are the cartesian product in the
/// order tau1, loop_cycles, voltage_ratio; every axis is strictly increasing.
struct SweepAxes {
  std::vector<double> tau1_ns;
  std::vector<std::int64_t> loop_cycles;
  std::vector<double> voltage_ratio;

  [[nodiscard]] bool empty() const { return tau1_ns.empty() && loop_cycles.empty() && voltage_ratio.empty(); }
};

struct SweepPoint {
  std::optional<double> tau1_ns;
  std::optional<std::int64_t> loop_cycles;
  std::optional<double> voltage_ratio;
};

std::vector<SweepPoint> sweep_points(const SweepAxes& axes);
nlohmann::json to_json(const SweepPoint& p);

enum class EstimateKind { Cross, Auto };

/// A g2 estimate between two scenario gates (Cross) or between the two HBT
/// outputs of one gate (Auto, `b` unused).
struct EstimateSpec {
  std::string label;
  EstimateKind kind = EstimateKind::Cross;
  std::string a;
  std::string b;
};

struct OutputSpec {
  bool records = true;
  std::string records_file = "records.csv";
  std::string estimates_stem = "estimates";
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string preset = "none";  ///< none, fig3 or chain
  RunConfig run{};
  /// Set for two-photon chain runs; the plan is compiled at resolve time.
  std::optional<ChainRequest> chain;
  ChainConstants chain_constants{};
  SweepAxes sweep{};
  std::vector<EstimateSpec> estimates;  ///< empty: defaults for the timing mode
  OutputSpec output{};
};

/// Parses and validates a JSON scenario. Unknown keys, wrong types and
/// out-of-domain values raise ConfigError naming the field path; syntax
/// errors name the line.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form; parse_config(config_to_json(c).dump()) reproduces c.
nlohmann::json config_to_json(const ScenarioConfig& c);

std::string sha256_hex(std::string_view data);
/// SHA-256 of the canonical JSON form without the thread count.
std::string config_hash(const ScenarioConfig& c);

/// The run configuration of one sweep point, with the chain plan compiled.
RunConfig resolve_point(const ScenarioConfig& c, const SweepPoint& p);

std::vector<EstimateSpec> default_estimates(const RunConfig& run);

/// Window pair measured by an estimate spec on the given run.
std::pair<WindowSpec, WindowSpec> estimate_windows(const RunConfig& run, const EstimateSpec& spec);

/// Fixed-point decimal text of x.
std::string format_fixed(double x, int decimals);

/// trial_id,detector,time_ns with three decimals.
void write_records_csv(std::ostream& os, std::span<const DetectionRecord> records);
std::vector<DetectionRecord> read_records_csv(std::istream& is);

nlohmann::json to_json(const CorrelationEstimate& e);
nlohmann::json to_json(const ChainPlan& p);
ChainPlan plan_from_json(const nlohmann::json& j);

/// t_ns,g2,err rows (header optional).
std::vector<DecaySample> read_decay_table(std::istream& is);
void write_decay_table(std::ostream& os, std::span<const DecaySample> samples);

}  // namespace hqm
