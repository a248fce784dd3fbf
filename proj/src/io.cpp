#include "hqm/io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "hqm/errors.hpp"
#include "hqm/scenarios.hpp"

namespace hqm {

using nlohmann::json;

const char* artifact_version() { return HQM_VERSION; }

namespace {

// Strict view of one JSON object: every read marks the key as known and
// finish() rejects whatever was not read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    known_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) out = as_number(*v, field(key));
  }
  void time(const std::string& key, TimeNs& out) {
    if (const json* v = get(key)) out = TimeNs{as_number(*v, field(key))};
  }
  void integer(const std::string& key, std::int64_t& out) {
    if (const json* v = get(key)) out = as_integer(*v, field(key));
  }
  void integer(const std::string& key, int& out) {
    if (const json* v = get(key)) {
      const auto x = as_integer(*v, field(key));
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError(field(key), "integer out of range");
      out = static_cast<int>(x);
    }
  }
  void unsigned_integer(const std::string& key, std::uint64_t& out) {
    if (const json* v = get(key)) {
      if (v->is_number_unsigned()) {
        out = v->get<std::uint64_t>();
      } else if (v->is_number_integer()) {
        throw ConfigError(field(key), "must be >= 0");
      } else {
        throw ConfigError(field(key), "expected a non-negative integer");
      }
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  std::optional<Section> sub(const std::string& key) {
    if (const json* v = get(key)) return Section(*v, field(key));
    return std::nullopt;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!known_.contains(key)) throw ConfigError(field(key), "unknown key");
  }

  static double as_number(const json& v, const std::string& f) {
    if (!v.is_number()) throw ConfigError(f, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(f, "must be finite");
    return x;
  }
  static std::int64_t as_integer(const json& v, const std::string& f) {
    if (v.is_number_integer()) {
      if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
        throw ConfigError(f, "integer out of range");
      return v.get<std::int64_t>();
    }
    throw ConfigError(f, "expected an integer");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

void read_decay(Section s, DecayFitParams& d) {
  std::string form = to_string(d.form);
  s.string("form", form);
  try {
    d.form = decay_form_from_string(form);
  } catch (const ParameterError& e) {
    throw ConfigError(s.field("form"), e.what());
  }
  s.number("a", d.a);
  s.number("b", d.b);
  s.number("c", d.c);
  s.finish();
}

void read_ford(Section s, FordParams& f) {
  s.number("chi", f.chi);
  s.number("eta_stokes", f.eta_stokes);
  s.number("eta_as", f.eta_as);
  s.number("eta_ret0", f.eta_ret0);
  if (auto d = s.sub("decay")) read_decay(*d, f.decay);
  s.number("bg_stokes", f.bg_stokes);
  s.number("bg_as", f.bg_as);
  s.time("pump_duration_ns", f.pump_duration);
  s.time("write_period_ns", f.write_period);
  if (auto m = s.sub("metadata")) {
    m->number("write_detuning_ghz", f.metadata.write_detuning_ghz);
    m->number("read_detuning_ghz", f.metadata.read_detuning_ghz);
    m->number("ground_splitting_ghz", f.metadata.ground_splitting_ghz);
    m->number("beam_waist_um", f.metadata.beam_waist_um);
    m->finish();
  }
  s.finish();
}

void read_loop(Section s, LoopParams& l) {
  s.time("period_ns", l.period_tau);
  s.number("transmission_per_cycle", l.transmission_per_cycle);
  s.time("pc_rise_time_ns", l.pc_rise_time);
  s.time("pc_min_spacing_ns", l.pc_min_spacing);
  s.number("voltage_ratio", l.voltage_ratio);
  s.finish();
}

void read_channel(Section s, ChannelParams& c) {
  s.number("length_m", c.length_m);
  s.number("group_velocity_m_per_s", c.group_velocity);
  s.number("transmission", c.transmission);
  s.finish();
}

void read_feedback(Section s, FeedbackConfig& f) {
  s.integer("max_attempts", f.max_attempts);
  s.time("attempt_spacing_ns", f.attempt_spacing);
  s.time("period_ns", f.period);
  s.finish();
}

template <class T>
std::vector<T> read_axis(const json* v, const std::string& f) {
  std::vector<T> out;
  if (!v) return out;
  if (!v->is_array()) throw ConfigError(f, "expected an array");
  if (v->empty()) throw ConfigError(f, "sweep grid must not be empty");
  for (std::size_t i = 0; i < v->size(); ++i) {
    const std::string fi = f + "[" + std::to_string(i) + "]";
    if constexpr (std::is_same_v<T, double>) {
      out.push_back(Section::as_number((*v)[i], fi));
    } else {
      out.push_back(Section::as_integer((*v)[i], fi));
    }
    if (i > 0 && !(out[i] > out[i - 1])) throw ConfigError(fi, "sweep grid must be strictly increasing");
  }
  return out;
}

template <class F>
void wrap(const std::string& field, F check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const ParameterError& e) {
    throw ConfigError(field, e.what());
  }
}

ScenarioConfig preset_config(const std::string& preset) {
  ScenarioConfig c;
  c.preset = preset;
  if (preset == "fig3") {
    c.run = scenarios::fig3_pair_config(TimeNs{30.0}, scenarios::kFig3LoopCycles, 0, 1);
  } else if (preset == "chain") {
    c.run.ford = scenarios::chain_ford();
    c.run.loop = scenarios::chain_loop();
    c.run.channel = scenarios::chain_link();
    c.run.delay_fiber = scenarios::chain_delay_fiber();
    c.chain_constants = scenarios::chain_constants();
    c.run.feedback = c.chain_constants.feedback;
    c.chain = table1_rows().front().request;
  } else if (preset != "none") {
    throw ConfigError("preset", "unknown preset '" + preset + "' (expected none, fig3 or chain)");
  }
  return c;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) line += text[i] == '\n';
  return line;
}

}  // namespace

std::vector<SweepPoint> sweep_points(const SweepAxes& axes) {
  std::vector<SweepPoint> out{SweepPoint{}};
  auto expand = [&](auto&& values, auto member) {
    if (values.empty()) return;
    std::vector<SweepPoint> next;
    for (const auto& p : out)
      for (const auto& v : values) {
        SweepPoint q = p;
        q.*member = v;
        next.push_back(q);
      }
    out = std::move(next);
  };
  expand(axes.tau1_ns, &SweepPoint::tau1_ns);
  expand(axes.loop_cycles, &SweepPoint::loop_cycles);
  expand(axes.voltage_ratio, &SweepPoint::voltage_ratio);
  return out;
}

json to_json(const SweepPoint& p) {
  json j = json::object();
  if (p.tau1_ns) j["tau1_ns"] = *p.tau1_ns;
  if (p.loop_cycles) j["loop_cycles"] = *p.loop_cycles;
  if (p.voltage_ratio) j["voltage_ratio"] = *p.voltage_ratio;
  return j;
}

ScenarioConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("line " + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)), e.what());
  }
  Section s(root, "");
  std::string preset = "none";
  s.string("preset", preset);
  ScenarioConfig c = preset_config(preset);

  s.string("name", c.name);
  s.unsigned_integer("seed", c.run.seed);
  if (!root.contains("seed")) throw ConfigError("seed", "required (runs are never seeded from the clock)");
  s.unsigned_integer("n_trials", c.run.n_trials);
  std::uint64_t threads = c.run.threads;
  s.unsigned_integer("threads", threads);
  c.run.threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, 4096));
  s.time("gate_width_ns", c.run.gate_width);
  s.number("pulse_fwhm_ns", c.run.pulse_fwhm_ns);

  if (auto f = s.sub("ford")) read_ford(*f, c.run.ford);
  if (auto l = s.sub("loop")) read_loop(*l, c.run.loop);
  if (auto ch = s.sub("channel")) read_channel(*ch, c.run.channel);
  if (auto df = s.sub("delay_fiber")) read_channel(*df, c.run.delay_fiber);
  if (auto fb = s.sub("feedback")) read_feedback(*fb, c.run.feedback);
  if (auto t = s.sub("topology")) {
    t->boolean("loop", c.run.topology.loop);
    t->boolean("hbt", c.run.topology.hbt);
    t->finish();
  }

  const json* pair_j = root.contains("pair") ? &root["pair"] : nullptr;
  const json* chain_j = root.contains("chain") ? &root["chain"] : nullptr;
  if (pair_j && chain_j) throw ConfigError("chain", "a scenario has either a pair or a chain section");
  if (auto p = s.sub("pair")) {
    PairTiming pt = std::holds_alternative<PairTiming>(c.run.timing) ? std::get<PairTiming>(c.run.timing) : PairTiming{};
    p->time("tau1_ns", pt.tau1);
    p->integer("loop_cycles", pt.loop_cycles);
    p->boolean("use_delay_fiber", pt.use_delay_fiber);
    p->finish();
    c.run.timing = pt;
    c.chain.reset();
  }
  if (auto ch = s.sub("chain")) {
    ChainRequest r = c.chain.value_or(ChainRequest{});
    std::string op = to_string(r.operation);
    ch->string("operation", op);
    try {
      r.operation = chain_op_from_string(op);
    } catch (const ParameterError& e) {
      throw ConfigError(ch->field("operation"), e.what());
    }
    ch->time("t3_ns", r.target_t3);
    ch->time("t4_ns", r.target_t4);
    if (const json* t5 = ch->get("t5_ns")) {
      if (t5->is_null()) {
        r.target_t5.reset();
      } else {
        r.target_t5 = TimeNs{Section::as_number(*t5, ch->field("t5_ns"))};
      }
    }
    if (const json* ratio = ch->get("chop_ratio")) {
      if (ratio->is_null()) {
        r.chop_ratio.reset();
      } else {
        if (!ratio->is_array() || ratio->size() != 2) throw ConfigError(ch->field("chop_ratio"), "expected [first, second]");
        r.chop_ratio = std::pair{Section::as_number((*ratio)[0], ch->field("chop_ratio[0]")),
                                 Section::as_number((*ratio)[1], ch->field("chop_ratio[1]"))};
      }
    }
    ch->time("fine_tune_ns", r.fine_tune_delta);
    ch->finish();
    c.chain = r;
  }
  if (auto k = s.sub("chain_constants")) {
    k->time("t1_ns", c.chain_constants.t1);
    k->time("direct_path_offset_ns", c.chain_constants.direct_path_offset);
    k->integer("base_cycles", c.chain_constants.base_cycles);
    k->time("fine_tune_step_ns", c.chain_constants.fine_tune_step);
    k->integer("max_chop_gap", c.chain_constants.max_chop_gap);
    k->finish();
  }
  if (c.chain) c.chain_constants.feedback = c.run.feedback;

  if (auto sw = s.sub("sweep")) {
    c.sweep.tau1_ns = read_axis<double>(sw->get("tau1_ns"), sw->field("tau1_ns"));
    c.sweep.loop_cycles = read_axis<std::int64_t>(sw->get("loop_cycles"), sw->field("loop_cycles"));
    c.sweep.voltage_ratio = read_axis<double>(sw->get("voltage_ratio"), sw->field("voltage_ratio"));
    sw->finish();
    if (c.chain && (!c.sweep.tau1_ns.empty() || !c.sweep.loop_cycles.empty()))
      throw ConfigError("sweep", "tau1 and loop-cycle sweeps apply to pair scenarios only");
    for (std::size_t i = 0; i < c.sweep.tau1_ns.size(); ++i)
      if (c.sweep.tau1_ns[i] < 0.0) throw ConfigError("sweep.tau1_ns[" + std::to_string(i) + "]", "must be >= 0");
    for (std::size_t i = 0; i < c.sweep.loop_cycles.size(); ++i)
      if (c.sweep.loop_cycles[i] < 0) throw ConfigError("sweep.loop_cycles[" + std::to_string(i) + "]", "must be >= 0");
    for (std::size_t i = 0; i < c.sweep.voltage_ratio.size(); ++i)
      if (c.sweep.voltage_ratio[i] < 0.0 || c.sweep.voltage_ratio[i] > 1.0)
        throw ConfigError("sweep.voltage_ratio[" + std::to_string(i) + "]", "must lie in [0, 1]");
  }

  if (const json* est = s.get("estimates")) {
    if (!est->is_array()) throw ConfigError("estimates", "expected an array");
    c.estimates.clear();
    for (std::size_t i = 0; i < est->size(); ++i) {
      Section e((*est)[i], "estimates[" + std::to_string(i) + "]");
      EstimateSpec spec;
      std::string kind = "cross";
      e.string("label", spec.label);
      e.string("kind", kind);
      e.string("a", spec.a);
      e.string("b", spec.b);
      e.finish();
      if (kind == "cross") {
        spec.kind = EstimateKind::Cross;
        if (spec.b.empty()) throw ConfigError(e.field("b"), "required for a cross estimate");
      } else if (kind == "auto") {
        spec.kind = EstimateKind::Auto;
      } else {
        throw ConfigError(e.field("kind"), "expected cross or auto");
      }
      if (spec.a.empty()) throw ConfigError(e.field("a"), "required");
      if (spec.label.empty()) spec.label = spec.kind == EstimateKind::Auto ? spec.a + "-" + spec.a : spec.a + "-" + spec.b;
      c.estimates.push_back(spec);
    }
  }

  if (auto o = s.sub("output")) {
    o->boolean("records", c.output.records);
    o->string("records_file", c.output.records_file);
    o->string("estimates_stem", c.output.estimates_stem);
    o->finish();
    if (c.output.records_file.empty()) throw ConfigError("output.records_file", "must not be empty");
    if (c.output.estimates_stem.empty()) throw ConfigError("output.estimates_stem", "must not be empty");
  }
  s.finish();

  if (c.run.n_trials == 0) throw ConfigError("n_trials", "must be >= 1");
  wrap("ford", [&] { c.run.ford.validate(); });
  wrap("loop", [&] { c.run.loop.validate(); });
  wrap("channel", [&] { c.run.channel.validate(true); });
  wrap("delay_fiber", [&] { c.run.delay_fiber.validate(false); });
  wrap("feedback", [&] { c.run.feedback.validate(c.run.ford); });
  if (!(c.run.gate_width.value > 0.0)) throw ConfigError("gate_width_ns", "must be > 0");
  if (!(c.run.pulse_fwhm_ns > 0.0)) throw ConfigError("pulse_fwhm_ns", "must be > 0");
  if (const auto* pt = std::get_if<PairTiming>(&c.run.timing)) {
    if (pt->tau1.value < 0.0) throw ConfigError("pair.tau1_ns", "must be >= 0");
    if (pt->loop_cycles < 0) throw ConfigError("pair.loop_cycles", "must be >= 0");
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

json decay_json(const DecayFitParams& d) { return {{"form", to_string(d.form)}, {"a", d.a}, {"b", d.b}, {"c", d.c}}; }

json channel_json(const ChannelParams& c) {
  return {{"length_m", c.length_m}, {"group_velocity_m_per_s", c.group_velocity}, {"transmission", c.transmission}};
}

json loop_json(const LoopParams& l) {
  return {{"period_ns", l.period_tau.value},
          {"transmission_per_cycle", l.transmission_per_cycle},
          {"pc_rise_time_ns", l.pc_rise_time.value},
          {"pc_min_spacing_ns", l.pc_min_spacing.value},
          {"voltage_ratio", l.voltage_ratio}};
}

json feedback_json(const FeedbackConfig& f) {
  return {{"max_attempts", f.max_attempts}, {"attempt_spacing_ns", f.attempt_spacing.value}, {"period_ns", f.period.value}};
}

}  // namespace

json config_to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["preset"] = c.preset;
  j["seed"] = c.run.seed;
  j["n_trials"] = c.run.n_trials;
  j["threads"] = c.run.threads;
  j["gate_width_ns"] = c.run.gate_width.value;
  j["pulse_fwhm_ns"] = c.run.pulse_fwhm_ns;
  const FordParams& f = c.run.ford;
  j["ford"] = {{"chi", f.chi},
               {"eta_stokes", f.eta_stokes},
               {"eta_as", f.eta_as},
               {"eta_ret0", f.eta_ret0},
               {"decay", decay_json(f.decay)},
               {"bg_stokes", f.bg_stokes},
               {"bg_as", f.bg_as},
               {"pump_duration_ns", f.pump_duration.value},
               {"write_period_ns", f.write_period.value},
               {"metadata",
                {{"write_detuning_ghz", f.metadata.write_detuning_ghz},
                 {"read_detuning_ghz", f.metadata.read_detuning_ghz},
                 {"ground_splitting_ghz", f.metadata.ground_splitting_ghz},
                 {"beam_waist_um", f.metadata.beam_waist_um}}}};
  j["loop"] = loop_json(c.run.loop);
  j["channel"] = channel_json(c.run.channel);
  j["delay_fiber"] = channel_json(c.run.delay_fiber);
  j["feedback"] = feedback_json(c.run.feedback);
  j["topology"] = {{"loop", c.run.topology.loop}, {"hbt", c.run.topology.hbt}};
  if (c.chain) {
    const ChainRequest& r = *c.chain;
    json ch = {{"operation", to_string(r.operation)},
               {"t3_ns", r.target_t3.value},
               {"t4_ns", r.target_t4.value},
               {"fine_tune_ns", r.fine_tune_delta.value}};
    ch["t5_ns"] = r.target_t5 ? json(r.target_t5->value) : json(nullptr);
    ch["chop_ratio"] = r.chop_ratio ? json::array({r.chop_ratio->first, r.chop_ratio->second}) : json(nullptr);
    j["chain"] = ch;
    j["chain_constants"] = {{"t1_ns", c.chain_constants.t1.value},
                            {"direct_path_offset_ns", c.chain_constants.direct_path_offset.value},
                            {"base_cycles", c.chain_constants.base_cycles},
                            {"fine_tune_step_ns", c.chain_constants.fine_tune_step.value},
                            {"max_chop_gap", c.chain_constants.max_chop_gap}};
  } else if (const auto* pt = std::get_if<PairTiming>(&c.run.timing)) {
    j["pair"] = {{"tau1_ns", pt->tau1.value}, {"loop_cycles", pt->loop_cycles}, {"use_delay_fiber", pt->use_delay_fiber}};
  }
  if (!c.sweep.empty()) {
    json sw = json::object();
    if (!c.sweep.tau1_ns.empty()) sw["tau1_ns"] = c.sweep.tau1_ns;
    if (!c.sweep.loop_cycles.empty()) sw["loop_cycles"] = c.sweep.loop_cycles;
    if (!c.sweep.voltage_ratio.empty()) sw["voltage_ratio"] = c.sweep.voltage_ratio;
    j["sweep"] = sw;
  }
  if (!c.estimates.empty()) {
    json e = json::array();
    for (const auto& s : c.estimates) {
      json x = {{"label", s.label}, {"kind", s.kind == EstimateKind::Cross ? "cross" : "auto"}, {"a", s.a}};
      if (s.kind == EstimateKind::Cross) x["b"] = s.b;
      e.push_back(x);
    }
    j["estimates"] = e;
  }
  j["output"] = {{"records", c.output.records},
                 {"records_file", c.output.records_file},
                 {"estimates_stem", c.output.estimates_stem}};
  return j;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string config_hash(const ScenarioConfig& c) {
  // The worker count never changes results, so it stays out of the hash.
  json j = config_to_json(c);
  j.erase("threads");
  return sha256_hex(j.dump());
}

RunConfig resolve_point(const ScenarioConfig& c, const SweepPoint& p) {
  RunConfig run = c.run;
  if (p.voltage_ratio) run.loop.voltage_ratio = *p.voltage_ratio;
  if (c.chain) {
    if (p.tau1_ns || p.loop_cycles) throw ConfigError("sweep", "tau1 and loop-cycle sweeps apply to pair scenarios only");
    ChainConstants k = c.chain_constants;
    k.feedback = run.feedback;
    run.timing = ChainTiming{plan(*c.chain, run.loop, run.ford, run.delay_fiber, k)};
  } else {
    PairTiming pt = std::holds_alternative<PairTiming>(run.timing) ? std::get<PairTiming>(run.timing) : PairTiming{};
    if (p.tau1_ns) pt.tau1 = TimeNs{*p.tau1_ns};
    if (p.loop_cycles) pt.loop_cycles = *p.loop_cycles;
    run.timing = pt;
  }
  return run;
}

std::vector<EstimateSpec> default_estimates(const RunConfig& run) {
  std::vector<EstimateSpec> out;
  const auto gates = scenario_gates(run);
  for (const auto& s : gates) {
    if (s.detectors != detector_bit(Detector::S)) continue;
    for (const auto& a : gates)
      if (a.detectors & kAntiStokesMask) out.push_back({s.label + "-" + a.label, EstimateKind::Cross, s.label, a.label});
  }
  if (run.topology.hbt)
    for (const auto& a : gates)
      if ((a.detectors & kAntiStokesMask) == kAntiStokesMask)
        out.push_back({a.label + "-" + a.label, EstimateKind::Auto, a.label, ""});
  return out;
}

std::pair<WindowSpec, WindowSpec> estimate_windows(const RunConfig& run, const EstimateSpec& spec) {
  const Gate a = gate_by_label(run, spec.a);
  if (spec.kind == EstimateKind::Auto) {
    if ((a.detectors & kAntiStokesMask) != kAntiStokesMask)
      throw ParameterError("auto-correlation '" + spec.label + "' needs a gate on both HBT outputs");
    const WindowSpec w = WindowSpec::from_gate(a);
    return {w.on(Detector::AS_A), w.on(Detector::AS_B)};
  }
  return {WindowSpec::from_gate(a), WindowSpec::from_gate(gate_by_label(run, spec.b))};
}

std::string format_fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

void write_records_csv(std::ostream& os, std::span<const DetectionRecord> records) {
  os << "trial_id,detector,time_ns\n";
  for (const auto& r : records) os << r.trial_id << ',' << to_string(r.detector) << ',' << format_fixed(r.time.value, 3) << '\n';
}

std::vector<DetectionRecord> read_records_csv(std::istream& is) {
  std::vector<DetectionRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line == "trial_id,detector,time_ns") continue;
    std::istringstream ls(line);
    std::string id, det, t;
    if (!std::getline(ls, id, ',') || !std::getline(ls, det, ',') || !std::getline(ls, t))
      throw ConfigError("line " + std::to_string(n), "expected trial_id,detector,time_ns");
    DetectionRecord r;
    try {
      std::size_t pos = 0;
      r.trial_id = std::stoull(id, &pos);
      if (pos != id.size()) throw std::invalid_argument(id);
      r.detector = detector_from_string(det);
      r.time = TimeNs{std::stod(t, &pos)};
      if (pos != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception& e) {
      throw ConfigError("line " + std::to_string(n), std::string("malformed record: ") + e.what());
    }
    out.push_back(r);
  }
  return out;
}

json to_json(const CorrelationEstimate& e) {
  return {{"value", e.value},     {"std_err", e.std_err}, {"n_coinc", e.n_coinc},         {"n_a", e.n_a},
          {"n_b", e.n_b},         {"n_trials", e.n_trials}, {"upper_bound", e.upper_bound}};
}

namespace {

json opt_time(const std::optional<TimeNs>& t) { return t ? json(t->value) : json(nullptr); }

std::optional<TimeNs> read_opt_time(const json& j) {
  if (j.is_null()) return std::nullopt;
  return TimeNs{j.get<double>()};
}

SwitchKind switch_kind_from_string(const std::string& s) {
  for (SwitchKind k : {SwitchKind::MapIn, SwitchKind::MapOutFull, SwitchKind::MapOutPartial})
    if (s == to_string(k)) return k;
  throw ConfigError("events.kind", "unknown switch kind '" + s + "'");
}

}  // namespace

json to_json(const ChainPlan& p) {
  json j;
  j["operation"] = to_string(p.operation);
  const ChainConstants& k = p.constants;
  j["constants"] = {{"t1_ns", k.t1.value},
                    {"direct_path_offset_ns", k.direct_path_offset.value},
                    {"base_cycles", k.base_cycles},
                    {"fine_tune_step_ns", k.fine_tune_step.value},
                    {"feedback", feedback_json(k.feedback)},
                    {"max_chop_gap", k.max_chop_gap}};
  j["t1_ns"] = p.t1.value;
  j["t2_ns"] = p.t2.value;
  j["pump_duration_ns"] = p.pump_duration.value;
  j["route"] = {{"as1_via_fiber", p.route.as1_via_fiber},
                {"as2_via_fiber", p.route.as2_via_fiber},
                {"fiber_delay_ns", p.route.fiber_delay.value},
                {"fiber_transmission", p.route.fiber_transmission},
                {"direct_path_offset_ns", p.route.direct_path_offset.value}};
  j["k1"] = p.k1;
  j["k2"] = p.k2;
  j["chopped_photon"] = p.chopped_photon;
  j["chop_gap"] = p.chop_gap;
  j["chop_q"] = p.chop_q;
  j["voltages"] = p.voltages;
  j["base_t3_ns"] = p.base_t3.value;
  j["base_t4_ns"] = p.base_t4.value;
  j["target_t3_ns"] = p.target_t3.value;
  j["target_t4_ns"] = p.target_t4.value;
  j["target_t5_ns"] = opt_time(p.target_t5);
  j["achieved_t3_ns"] = p.achieved_t3.value;
  j["achieved_t4_ns"] = p.achieved_t4.value;
  j["achieved_t5_ns"] = opt_time(p.achieved_t5);
  j["residual_ns"] = p.residual.value;
  j["residual_t5_ns"] = opt_time(p.residual_t5);
  j["fine_tune_steps"] = p.fine_tune_steps;
  json ev = json::array();
  for (const auto& e : p.events)
    ev.push_back({{"time_ns", e.time.value}, {"kind", to_string(e.kind)}, {"target", e.target}, {"voltage", e.voltage}});
  j["events"] = ev;
  json modes = json::array();
  for (const auto& m : p.modes)
    modes.push_back({{"label", m.label}, {"photon", m.photon}, {"time_ns", m.time.value}, {"cycles", m.cycles},
                     {"fraction", m.fraction}});
  j["modes"] = modes;
  j["warnings"] = p.warnings;
  j["loop"] = loop_json(p.loop);
  return j;
}

ChainPlan plan_from_json(const json& j) {
  try {
    ChainPlan p;
    p.operation = chain_op_from_string(j.at("operation").get<std::string>());
    const json& k = j.at("constants");
    p.constants.t1 = TimeNs{k.at("t1_ns").get<double>()};
    p.constants.direct_path_offset = TimeNs{k.at("direct_path_offset_ns").get<double>()};
    p.constants.base_cycles = k.at("base_cycles").get<std::int64_t>();
    p.constants.fine_tune_step = TimeNs{k.at("fine_tune_step_ns").get<double>()};
    const json& fb = k.at("feedback");
    p.constants.feedback = {fb.at("max_attempts").get<int>(), TimeNs{fb.at("attempt_spacing_ns").get<double>()},
                            TimeNs{fb.at("period_ns").get<double>()}};
    p.constants.max_chop_gap = k.at("max_chop_gap").get<std::int64_t>();
    p.t1 = TimeNs{j.at("t1_ns").get<double>()};
    p.t2 = TimeNs{j.at("t2_ns").get<double>()};
    p.pump_duration = TimeNs{j.at("pump_duration_ns").get<double>()};
    const json& r = j.at("route");
    p.route = {r.at("as1_via_fiber").get<bool>(), r.at("as2_via_fiber").get<bool>(),
               TimeNs{r.at("fiber_delay_ns").get<double>()}, r.at("fiber_transmission").get<double>(),
               TimeNs{r.at("direct_path_offset_ns").get<double>()}};
    p.k1 = j.at("k1").get<std::int64_t>();
    p.k2 = j.at("k2").get<std::int64_t>();
    p.chopped_photon = j.at("chopped_photon").get<int>();
    p.chop_gap = j.at("chop_gap").get<std::int64_t>();
    p.chop_q = j.at("chop_q").get<double>();
    p.voltages = j.at("voltages").get<std::vector<double>>();
    p.base_t3 = TimeNs{j.at("base_t3_ns").get<double>()};
    p.base_t4 = TimeNs{j.at("base_t4_ns").get<double>()};
    p.target_t3 = TimeNs{j.at("target_t3_ns").get<double>()};
    p.target_t4 = TimeNs{j.at("target_t4_ns").get<double>()};
    p.target_t5 = read_opt_time(j.at("target_t5_ns"));
    p.achieved_t3 = TimeNs{j.at("achieved_t3_ns").get<double>()};
    p.achieved_t4 = TimeNs{j.at("achieved_t4_ns").get<double>()};
    p.achieved_t5 = read_opt_time(j.at("achieved_t5_ns"));
    p.residual = TimeNs{j.at("residual_ns").get<double>()};
    p.residual_t5 = read_opt_time(j.at("residual_t5_ns"));
    p.fine_tune_steps = j.at("fine_tune_steps").get<std::int64_t>();
    for (const auto& e : j.at("events"))
      p.events.push_back({TimeNs{e.at("time_ns").get<double>()}, switch_kind_from_string(e.at("kind").get<std::string>()),
                          e.at("target").get<int>(), e.at("voltage").get<double>()});
    for (const auto& m : j.at("modes"))
      p.modes.push_back({m.at("label").get<std::string>(), m.at("photon").get<int>(), TimeNs{m.at("time_ns").get<double>()},
                         m.at("cycles").get<std::int64_t>(), m.at("fraction").get<double>()});
    p.warnings = j.at("warnings").get<std::vector<std::string>>();
    const json& l = j.at("loop");
    p.loop.period_tau = TimeNs{l.at("period_ns").get<double>()};
    p.loop.transmission_per_cycle = l.at("transmission_per_cycle").get<double>();
    p.loop.pc_rise_time = TimeNs{l.at("pc_rise_time_ns").get<double>()};
    p.loop.pc_min_spacing = TimeNs{l.at("pc_min_spacing_ns").get<double>()};
    p.loop.voltage_ratio = l.at("voltage_ratio").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw ConfigError("plan", e.what());
  } catch (const ParameterError& e) {
    throw ConfigError("plan.operation", e.what());
  }
}

std::vector<DecaySample> read_decay_table(std::istream& is) {
  std::vector<DecaySample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (out.empty() && !(std::isdigit(static_cast<unsigned char>(line.front())) || line.front() == '-' ||
                         line.front() == '.' || line.front() == '+'))
      continue;  // header
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c, ','))
      throw ConfigError("line " + std::to_string(n), "expected t_ns,g2,err");
    try {
      out.push_back({std::stod(a), std::stod(b), std::stod(c)});
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(n), "malformed number");
    }
  }
  return out;
}

void write_decay_table(std::ostream& os, std::span<const DecaySample> samples) {
  os << "t_ns,g2,err\n";
  char buf[128];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.t, s.g2, s.err);
    os << buf;
  }
}

}  // namespace hqm
