#include "hqm/simulate.hpp"

#include <fstream>
#include <sstream>

#include "hqm/errors.hpp"

namespace hqm {

namespace {

// Coincidence counts plus, optionally, every record in trial order.
class RecordingCounter {
 public:
  RecordingCounter(std::vector<std::pair<WindowSpec, WindowSpec>> pairs, bool keep)
      : counter_(std::move(pairs)), keep_(keep) {}

  void add(std::uint64_t trial_id, std::span<const DetectionRecord> records) {
    counter_.add(trial_id, records);
    if (keep_) records_.insert(records_.end(), records.begin(), records.end());
  }
  void merge(RecordingCounter&& other) {
    counter_.merge(std::move(other.counter_));
    records_.insert(records_.end(), other.records_.begin(), other.records_.end());
  }

  [[nodiscard]] const CoincidenceCounter& counter() const { return counter_; }
  [[nodiscard]] const std::vector<DetectionRecord>& records() const { return records_; }

 private:
  CoincidenceCounter counter_;
  bool keep_;
  std::vector<DetectionRecord> records_;
};

std::string point_suffix(std::size_t i, std::size_t n) {
  if (n <= 1) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%03zu", i);
  return buf;
}

std::filesystem::path with_suffix(const std::string& file, const std::string& suffix) {
  const std::filesystem::path p(file);
  return p.parent_path() / (p.stem().string() + suffix + p.extension().string());
}

}  // namespace

OutputFormat output_format_from_string(const std::string& s) {
  if (s == "json") return OutputFormat::Json;
  if (s == "csv") return OutputFormat::Csv;
  throw ConfigError("format", "expected csv or json, got '" + s + "'");
}

std::optional<ClickProbabilities> analytic_prediction(const RunConfig& run) {
  const auto* pt = std::get_if<PairTiming>(&run.timing);
  if (!pt || run.feedback.max_attempts != 1) return std::nullopt;
  if (run.topology.loop && run.loop.voltage_ratio < 1.0) return std::nullopt;
  ChannelParams ch = run.channel;
  ch.transmission *= route_path_selection(pt->use_delay_fiber, run.delay_fiber).transmission;
  return analytic_click_probs(run.ford, pt->tau1, run.topology.loop ? pt->loop_cycles : 0, run.loop, ch);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

SimulationResult simulate(const ScenarioConfig& c, const std::filesystem::path& out_dir, OutputFormat format) {
  SimulationResult result;
  result.config_hash = config_hash(c);
  const auto points = sweep_points(c.sweep);
  const bool write = !out_dir.empty();

  // Resolve and validate every point before running any trial.
  std::vector<RunConfig> runs;
  std::vector<std::vector<EstimateSpec>> specs;
  for (const auto& p : points) {
    runs.push_back(resolve_point(c, p));
    runs.back().validate();
    specs.push_back(c.estimates.empty() ? default_estimates(runs.back()) : c.estimates);
    for (const auto& s : specs.back()) estimate_windows(runs.back(), s);
  }

  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<std::pair<WindowSpec, WindowSpec>> pairs;
    for (const auto& s : specs[i]) pairs.push_back(estimate_windows(runs[i], s));
    const bool keep = write && c.output.records;
    const auto acc =
        run_streaming<RecordingCounter>(runs[i], [&] { return RecordingCounter(pairs, keep); });

    PointResult row;
    row.point = points[i];
    row.analytic = analytic_prediction(runs[i]);
    for (std::size_t k = 0; k < specs[i].size(); ++k) {
      EstimateResult er{specs[i][k], std::nullopt, ""};
      try {
        er.estimate = acc.counter().estimate(k);
      } catch (const UndefinedEstimate& e) {
        er.undefined_reason = e.what();
      }
      row.estimates.push_back(std::move(er));
    }
    result.rows.push_back(std::move(row));

    if (keep) {
      std::ostringstream csv;
      csv << "# config_hash=" << result.config_hash << " seed=" << runs[i].seed << " version=" << artifact_version()
          << '\n';
      write_records_csv(csv, acc.records());
      const auto path = out_dir / with_suffix(c.output.records_file, point_suffix(i, points.size()));
      write_text_file(path, csv.str());
      result.files.push_back(path);
    }
  }

  if (write) {
    const bool json_out = format == OutputFormat::Json;
    const auto path = out_dir / (c.output.estimates_stem + (json_out ? ".json" : ".csv"));
    write_text_file(path, json_out ? estimates_json(c, result).dump(2) + "\n" : estimates_csv(c, result));
    result.files.push_back(path);
    const auto cfg_path = out_dir / "config.resolved.json";
    write_text_file(cfg_path, config_to_json(c).dump(2) + "\n");
    result.files.push_back(cfg_path);
  }
  return result;
}

nlohmann::json estimates_json(const ScenarioConfig& c, const SimulationResult& r) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["artifact_version"] = artifact_version();
  j["config_hash"] = r.config_hash;
  j["seed"] = c.run.seed;
  j["name"] = c.name;
  j["n_trials"] = c.run.n_trials;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    nlohmann::json jr;
    jr["index"] = i;
    jr["point"] = to_json(row.point);
    nlohmann::json ests = nlohmann::json::array();
    for (const auto& e : row.estimates) {
      nlohmann::json je = {{"label", e.spec.label},
                           {"kind", e.spec.kind == EstimateKind::Cross ? "cross" : "auto"},
                           {"a", e.spec.a}};
      if (e.spec.kind == EstimateKind::Cross) je["b"] = e.spec.b;
      if (e.estimate) {
        je.update(to_json(*e.estimate));
      } else {
        je["undefined"] = e.undefined_reason;
      }
      ests.push_back(je);
    }
    jr["estimates"] = ests;
    if (row.analytic) {
      nlohmann::json a = {{"p_stokes", row.analytic->p_stokes},
                          {"p_as", row.analytic->p_as},
                          {"p_coinc", row.analytic->p_coinc}};
      try {
        a["g2"] = g2_analytic(*row.analytic);
      } catch (const UndefinedEstimate&) {
        a["g2"] = nullptr;
      }
      jr["analytic"] = a;
    }
    rows.push_back(jr);
  }
  j["rows"] = rows;
  return j;
}

std::string estimates_csv(const ScenarioConfig& c, const SimulationResult& r) {
  std::ostringstream os;
  os << "# schema_version=" << kSchemaVersion << " config_hash=" << r.config_hash << " seed=" << c.run.seed
     << " version=" << artifact_version() << '\n';
  os << "index,tau1_ns,loop_cycles,voltage_ratio,label,value,std_err,n_coinc,n_a,n_b,n_trials,upper_bound\n";
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    const std::string tau1 = row.point.tau1_ns ? num(*row.point.tau1_ns) : "";
    const std::string k = row.point.loop_cycles ? std::to_string(*row.point.loop_cycles) : "";
    const std::string v = row.point.voltage_ratio ? num(*row.point.voltage_ratio) : "";
    for (const auto& e : row.estimates) {
      os << i << ',' << tau1 << ',' << k << ',' << v << ',' << e.spec.label << ',';
      if (e.estimate) {
        os << num(e.estimate->value) << ',' << num(e.estimate->std_err) << ',' << e.estimate->n_coinc << ','
           << e.estimate->n_a << ',' << e.estimate->n_b << ',' << e.estimate->n_trials << ','
           << (e.estimate->upper_bound ? "true" : "false") << '\n';
      } else {
        os << ",,,,,,\n";
      }
    }
  }
  return os.str();
}

}  // namespace hqm
