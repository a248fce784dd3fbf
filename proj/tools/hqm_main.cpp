// hqm: simulate, plan, fit and reproduce from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hqm/chainplan.hpp"
#include "hqm/errors.hpp"
#include "hqm/estimators.hpp"
#include "hqm/io.hpp"
#include "hqm/reproduce.hpp"
#include "hqm/scenarios.hpp"
#include "hqm/simulate.hpp"

namespace {

using nlohmann::json;

enum Exit : int { kOk = 0, kRuntime = 1, kConfig = 2, kConstraint = 3, kAcceptance = 4 };

constexpr const char* kFooter =
    "Environment:\n"
    "  HQM_THREADS   worker threads for Monte Carlo runs (default: hardware concurrency).\n"
    "                Results do not depend on the thread count.\n"
    "\n"
    "Exit codes: 0 success, 2 configuration or usage error, 3 schedule constraint\n"
    "violation, 4 acceptance check failed, 1 other runtime failure.";

void emit(const std::string& text, const std::string& out_dir, const std::string& file) {
  if (out_dir.empty()) {
    std::cout << text;
    return;
  }
  const auto path = std::filesystem::path(out_dir) / file;
  hqm::write_text_file(path, text);
  std::cerr << "wrote " << path.string() << '\n';
}

std::pair<double, double> parse_ratio(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw hqm::ConfigError("ratio", "expected A:B, got '" + s + "'");
  try {
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw hqm::ConfigError("ratio", "expected A:B, got '" + s + "'");
  }
}

std::string events_csv(const hqm::ChainPlan& p) {
  std::ostringstream os;
  os << "time_ns,kind,slot,voltage\n";
  for (const auto& e : p.events)
    os << hqm::format_fixed(e.time.value, 3) << ',' << hqm::to_string(e.kind) << ',' << e.target << ','
       << hqm::format_fixed(e.voltage, 6) << '\n';
  return os.str();
}

std::string table1_csv(const std::vector<std::pair<std::string, hqm::ChainPlan>>& plans) {
  std::ostringstream os;
  os << "row,operation,t1_ns,t2_ns,t3_ns,t4_ns,t5_ns,k1,k2,residual_ns\n";
  for (const auto& [name, p] : plans) {
    os << '"' << name << "\"," << hqm::to_string(p.operation) << ',' << hqm::format_fixed(p.t1.value, 3) << ','
       << hqm::format_fixed(p.t2.value, 3) << ',' << hqm::format_fixed(p.achieved_t3.value, 3) << ','
       << hqm::format_fixed(p.achieved_t4.value, 3) << ','
       << (p.achieved_t5 ? hqm::format_fixed(p.achieved_t5->value, 3) : "") << ',' << p.k1 << ',' << p.k2 << ','
       << hqm::format_fixed(p.residual.value, 3) << '\n';
  }
  return os.str();
}

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::string out = ".";
  std::string format = "json";
};

int cmd_simulate(const SimulateArgs& a) {
  hqm::ScenarioConfig c = hqm::load_config(a.config);
  if (a.seed) c.run.seed = *a.seed;
  if (a.trials) {
    if (*a.trials == 0) throw hqm::ConfigError("trials", "must be >= 1");
    c.run.n_trials = *a.trials;
  }
  const auto format = hqm::output_format_from_string(a.format);
  const auto r = hqm::simulate(c, a.out, format);
  std::cerr << "config_hash " << r.config_hash << '\n';
  for (const auto& f : r.files) std::cerr << "wrote " << f.string() << '\n';
  return kOk;
}

struct PlanArgs {
  std::string config;
  std::string op;
  std::optional<double> t3, t4, t5;
  std::string ratio;
  double fine_tune = 0.0;
  bool table1 = false;
  std::string out;
  std::string format = "json";
};

int cmd_plan(const PlanArgs& a) {
  const auto format = hqm::output_format_from_string(a.format);
  if (a.table1) {
    std::vector<std::pair<std::string, hqm::ChainPlan>> plans;
    json rows = json::array();
    for (const auto& row : hqm::table1_rows()) {
      plans.emplace_back(row.name, hqm::scenarios::chain_plan(row.request));
      json j = hqm::to_json(plans.back().second);
      j["row"] = row.name;
      rows.push_back(j);
    }
    json doc = {{"schema_version", hqm::kSchemaVersion}, {"artifact_version", hqm::artifact_version()}, {"plans", rows}};
    doc["config_hash"] = hqm::sha256_hex(rows.dump());
    if (format == hqm::OutputFormat::Json)
      emit(doc.dump(2) + "\n", a.out, "table1_plans.json");
    else
      emit("# config_hash=" + doc["config_hash"].get<std::string>() + "\n" + table1_csv(plans), a.out,
           "table1_plans.csv");
    return kOk;
  }

  hqm::ChainPlan p;
  json source;
  if (!a.config.empty()) {
    if (!a.op.empty()) throw hqm::ConfigError("op", "--op cannot be combined with --config");
    const hqm::ScenarioConfig c = hqm::load_config(a.config);
    if (!c.chain) throw hqm::ConfigError("chain", "the configuration has no chain section");
    const hqm::RunConfig run = hqm::resolve_point(c, hqm::sweep_points(c.sweep).front());
    p = std::get<hqm::ChainTiming>(run.timing).plan;
    source = hqm::config_to_json(c);
  } else {
    if (a.op.empty()) throw hqm::ConfigError("op", "one of --config, --op or --table1 is required");
    hqm::ChainRequest req;
    req.operation = hqm::chain_op_from_string(a.op);
    if (a.t3) req.target_t3 = hqm::TimeNs{*a.t3};
    if (a.t4) req.target_t4 = hqm::TimeNs{*a.t4};
    if (a.t5) req.target_t5 = hqm::TimeNs{*a.t5};
    if (!a.ratio.empty()) req.chop_ratio = parse_ratio(a.ratio);
    req.fine_tune_delta = hqm::TimeNs{a.fine_tune};
    p = hqm::scenarios::chain_plan(req);
    source = {{"preset", "chain"}, {"operation", a.op}, {"t3_ns", req.target_t3.value}, {"t4_ns", req.target_t4.value},
              {"t5_ns", a.t5 ? json(*a.t5) : json(nullptr)}, {"ratio", a.ratio}, {"fine_tune_ns", a.fine_tune}};
  }
  json doc = hqm::to_json(p);
  doc["schema_version"] = hqm::kSchemaVersion;
  doc["artifact_version"] = hqm::artifact_version();
  doc["config_hash"] = hqm::sha256_hex(source.dump());
  for (const auto& w : p.warnings) std::cerr << "warning: " << w << '\n';
  if (format == hqm::OutputFormat::Json)
    emit(doc.dump(2) + "\n", a.out, "plan.json");
  else
    emit("# config_hash=" + doc["config_hash"].get<std::string>() + "\n" + events_csv(p), a.out, "schedule.csv");
  return kOk;
}

struct FitArgs {
  std::string input;
  std::string form = "rq";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_fit(const FitArgs& a) {
  std::ifstream in(a.input, std::ios::binary);
  if (!in) throw hqm::ConfigError("input", "cannot open " + a.input);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::istringstream is(text);
  const auto samples = hqm::read_decay_table(is);
  const hqm::DecayForm form = hqm::decay_form_from_string(a.form);
  const hqm::DecayFitResult r = hqm::fit_decay(samples, form, a.seed);

  json params = {{"a", r.params.a}, {"b", r.params.b}};
  if (form == hqm::DecayForm::RationalQuadratic) params["c"] = r.params.c;
  json doc = {{"schema_version", hqm::kSchemaVersion},
              {"artifact_version", hqm::artifact_version()},
              {"config_hash", hqm::sha256_hex(text + "\nform=" + hqm::to_string(form))},
              {"input", a.input},
              {"form", hqm::to_string(form)},
              {"n_points", samples.size()},
              {"params", params},
              {"std_errors", r.std_errors},
              {"covariance", r.covariance},
              {"chi2", r.chi2},
              {"dof", r.dof},
              {"reduced_chi2", r.reduced_chi2},
              {"starts", r.starts},
              {"converged_starts", r.converged_starts}};
  json life = json::object();
  for (auto conv : {hqm::LifetimeConvention::Peak, hqm::LifetimeConvention::Excess}) {
    try {
      life[hqm::to_string(conv)] = hqm::lifetime_1e(r.params, conv).value;
    } catch (const hqm::NoCrossingError& e) {
      life[hqm::to_string(conv)] = nullptr;
      std::cerr << "warning: " << e.what() << '\n';
    }
  }
  doc["lifetime_1e_ns"] = life;
  emit(doc.dump(2) + "\n", a.out, "fit.json");
  return kOk;
}

struct ReproduceArgs {
  std::string target;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> trials;
  std::string out = "reproduce_out";
};

int cmd_reproduce(const ReproduceArgs& a) {
  std::vector<std::string> targets;
  if (a.target == "all")
    targets = hqm::reproduce_targets();
  else
    targets = {a.target};
  hqm::ReproduceOptions opt;
  opt.seed = a.seed;
  opt.trials = a.trials;
  opt.out_dir = a.out;
  bool ok = true;
  for (const auto& t : targets) {
    // A target whose statistics cannot be evaluated fails its checks.
    try {
      const auto r = hqm::reproduce(t, opt);
      std::cout << hqm::format_summary(r);
      ok = ok && r.passed();
    } catch (const hqm::UndefinedEstimate& e) {
      std::cout << "FAIL " << t << ": " << e.what() << "\nRESULT FAIL\n";
      ok = false;
    } catch (const hqm::NoCrossingError& e) {
      std::cout << "FAIL " << t << ": " << e.what() << "\nRESULT FAIL\n";
      ok = false;
    } catch (const hqm::FitFailure& e) {
      std::cout << "FAIL " << t << ": " << e.what() << "\nRESULT FAIL\n";
      ok = false;
    }
  }
  return ok ? kOk : kAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid quantum-memory network simulator"};
  app.footer(kFooter);
  app.set_version_flag("--version", std::string(hqm::artifact_version()));
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run a scenario and write records and estimates");
  s->add_option("--config", sim.config, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", sim.seed, "Override the configured seed");
  s->add_option("--trials", sim.trials, "Override the configured trial count");
  s->add_option("--out", sim.out, "Output directory")->capture_default_str();
  s->add_option("--format", sim.format, "Estimates table format")->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  PlanArgs pl;
  auto* p = app.add_subcommand("plan", "Compile a photon-chain operation into a switch schedule");
  p->add_option("--config", pl.config, "Scenario file with a chain section")->check(CLI::ExistingFile);
  p->add_option("--op", pl.op, "fifo, filo, combine, split, chop, chop-fifo, chop-filo or fine-tune");
  p->add_option("--t3", pl.t3, "Target t3 (ns)");
  p->add_option("--t4", pl.t4, "Target t4 (ns)");
  p->add_option("--t5", pl.t5, "Target t5 for chop operations (ns)");
  p->add_option("--ratio", pl.ratio, "Chop intensity ratio A:B");
  p->add_option("--fine-tune", pl.fine_tune, "Source-side shift of t2 (ns, multiple of 2)");
  p->add_flag("--table1", pl.table1, "Plan every reference chain operation");
  p->add_option("--out", pl.out, "Output directory (default: stdout)");
  p->add_option("--format", pl.format, "json (plan) or csv (switch events)")->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  FitArgs fa;
  auto* f = app.add_subcommand("fit", "Fit a g2 decay table (t_ns,g2,err) and report 1/e lifetimes");
  f->add_option("--input", fa.input, "Decay table CSV")->required()->check(CLI::ExistingFile);
  f->add_option("--form", fa.form, "rq (rational quadratic) or exp")->capture_default_str();
  f->add_option("--seed", fa.seed, "Seed of the multi-start search")->capture_default_str();
  f->add_option("--out", fa.out, "Output directory (default: stdout)");

  ReproduceArgs ra;
  auto* r = app.add_subcommand("reproduce", "Run a calibrated target and evaluate its checks");
  std::vector<std::string> names = hqm::reproduce_targets();
  names.push_back("all");
  r->add_option("target", ra.target, "fig2, fig3a, fig3b, fig3c, fig4, table1, supp_bandwidth or all")
      ->required()
      ->check(CLI::IsMember(names));
  r->add_option("--seed", ra.seed, "Master seed")->capture_default_str();
  r->add_option("--trials", ra.trials, "Trials per Monte Carlo point (default: per target)");
  r->add_option("--out", ra.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*p) return cmd_plan(pl);
    if (*f) return cmd_fit(fa);
    if (*r) return cmd_reproduce(ra);
  } catch (const hqm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const hqm::SchedulingError& e) {
    std::cerr << "constraint violation: " << e.what() << '\n';
    return kConstraint;
  } catch (const hqm::ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kConfig;
  } catch (const hqm::LookupError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const hqm::FitFailure& e) {
    std::cerr << "fit failed: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
