#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hqm {

struct Check {
  std::string id;
  std::string description;
  double measured = 0.0;
  std::string expected;
  bool pass = true;
  bool informational = false;  ///< reported, never fails the target
};

struct ReproduceOptions {
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> trials;  ///< per Monte Carlo point; target default otherwise
  unsigned threads = 0;
  std::filesystem::path out_dir;        ///< empty: no files
};

struct ReproduceResult {
  std::string target;
  std::string config_hash;
  std::vector<Check> checks;
  std::vector<std::filesystem::path> files;
  nlohmann::json data;

  [[nodiscard]] bool passed() const;
  [[nodiscard]] const Check& check(const std::string& id) const;
};

/// fig2, fig3a, fig3b, fig3c, fig4, table1, supp_bandwidth.
const std::vector<std::string>& reproduce_targets();

/// Runs a calibrated scenario and evaluates its checks. Throws LookupError
/// for an unknown target. Never reads the clock or the network.
ReproduceResult reproduce(const std::string& target, const ReproduceOptions& opt = {});

/// One line per check: PASS/FAIL/INFO, id, measured vs expected.
std::string format_summary(const ReproduceResult& r);

}  // namespace hqm
