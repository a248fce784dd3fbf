#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hqm/io.hpp"

namespace hqm {

enum class OutputFormat { Json, Csv };

OutputFormat output_format_from_string(const std::string& s);

struct EstimateResult {
  EstimateSpec spec;
  std::optional<CorrelationEstimate> estimate;
  std::string undefined_reason;  ///< set when the estimate has a zero denominator
};

struct PointResult {
  SweepPoint point;
  std::vector<EstimateResult> estimates;
  /// Closed-form prediction, for single-attempt pair scenarios only.
  std::optional<ClickProbabilities> analytic;
};

struct SimulationResult {
  std::string config_hash;
  std::vector<PointResult> rows;
  std::vector<std::filesystem::path> files;
};

/// Closed-form click probabilities of a pair run, when the run is covered by
/// the analytic model (one write attempt, full map-out).
std::optional<ClickProbabilities> analytic_prediction(const RunConfig& run);

/// Runs every sweep point. With an output directory, writes the records CSV
/// (one file per point when sweeping) and the estimates table in `format`.
SimulationResult simulate(const ScenarioConfig& c, const std::filesystem::path& out_dir = {},
                          OutputFormat format = OutputFormat::Json);

/// The estimates table as written by simulate().
nlohmann::json estimates_json(const ScenarioConfig& c, const SimulationResult& r);
std::string estimates_csv(const ScenarioConfig& c, const SimulationResult& r);

/// Writes text to a file, replacing it. Throws Error on I/O failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hqm
