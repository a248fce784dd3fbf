#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "hqm/chainplan.hpp"
#include "hqm/errors.hpp"
#include "hqm/estimators.hpp"
#include "hqm/ford_node.hpp"
#include "hqm/io.hpp"
#include "hqm/phys_model.hpp"
#include "hqm/reproduce.hpp"
#include "hqm/scenarios.hpp"
#include "hqm/simulate.hpp"

namespace py = pybind11;
using namespace hqm;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
std::string plan_json(const std::string& op, double t3, double t4, std::optional<double> t5,
                      std::optional<std::pair<double, double>> ratio, double delta) {
  ChainRequest r;
  r.operation = chain_op_from_string(op);
  r.target_t3 = TimeNs{t3};
  r.target_t4 = TimeNs{t4};
  if (t5) r.target_t5 = TimeNs{*t5};
  r.chop_ratio = ratio;
  r.fine_tune_delta = TimeNs{delta};
  return to_json(scenarios::chain_plan(r)).dump();
}

std::string fit_json(const std::vector<double>& t, const std::vector<double>& g2, const std::vector<double>& err,
                     const std::string& form, std::uint64_t seed) {
  if (t.size() != g2.size() || t.size() != err.size()) throw ParameterError("t, g2 and err differ in length");
  std::vector<DecaySample> s;
  for (std::size_t i = 0; i < t.size(); ++i) s.push_back({t[i], g2[i], err[i]});
  const auto r = fit_decay(s, decay_form_from_string(form), seed);
  nlohmann::json j = {{"form", to_string(r.params.form)},
                      {"params", {{"a", r.params.a}, {"b", r.params.b}, {"c", r.params.c}}},
                      {"std_errors", r.std_errors},
                      {"covariance", r.covariance},
                      {"chi2", r.chi2},
                      {"dof", r.dof},
                      {"reduced_chi2", r.reduced_chi2},
                      {"starts", r.starts},
                      {"converged_starts", r.converged_starts}};
  try {
    j["lifetime_1e_ns"] = lifetime_1e(r.params).value;
  } catch (const NoCrossingError&) {
    j["lifetime_1e_ns"] = nullptr;
  }
  return j.dump();
}

std::string reproduce_json(const std::string& target, std::uint64_t seed, std::optional<std::uint64_t> trials,
                           const std::string& out_dir) {
  ReproduceOptions o;
  o.seed = seed;
  o.trials = trials;
  o.out_dir = out_dir;
  const auto r = reproduce(target, o);
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"id", c.id},
                      {"description", c.description},
                      {"measured", c.measured},
                      {"expected", c.expected},
                      {"pass", c.pass},
                      {"informational", c.informational}});
  return nlohmann::json{{"target", r.target}, {"config_hash", r.config_hash}, {"passed", r.passed()},
                        {"checks", checks}, {"summary", format_summary(r)}}
      .dump();
}

std::string simulate_json(const std::string& config_text, const std::string& out_dir, const std::string& format) {
  const ScenarioConfig c = parse_config(config_text);
  const auto r = simulate(c, out_dir, output_format_from_string(format));
  return estimates_json(c, r).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Heralded quantum memory network simulator";
  m.attr("__version__") = artifact_version();

  auto base = py::register_exception<Error>(m, "HqmError", PyExc_RuntimeError);
  auto param = py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<QuantizationError>(m, "QuantizationError", param.ptr());
  auto sched = py::register_exception<SchedulingError>(m, "SchedulingError", base.ptr());
  py::register_exception<UnreachableOrdering>(m, "UnreachableOrdering", sched.ptr());
  py::register_exception<SlotCollision>(m, "SlotCollision", sched.ptr());
  py::register_exception<SwitchConstraintViolation>(m, "SwitchConstraintViolation", sched.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<UndefinedEstimate>(m, "UndefinedEstimate", base.ptr());
  py::register_exception<FitFailure>(m, "FitFailure", base.ptr());
  py::register_exception<LookupError>(m, "LookupError", base.ptr());
  py::register_exception<UnphysicalInput>(m, "UnphysicalInput", base.ptr());
  py::register_exception<NoCrossingError>(m, "NoCrossingError", base.ptr());

  m.def(
      "click_probs",
      [](double chi, double eta_stokes, double bg_stokes, double eta_as_total, double bg_as) {
        const auto p = click_probs_for_efficiency(chi, eta_stokes, bg_stokes, eta_as_total, bg_as);
        return py::make_tuple(p.p_stokes, p.p_as, p.p_coinc);
      },
      py::arg("chi"), py::arg("eta_stokes"), py::arg("bg_stokes"), py::arg("eta_as_total"), py::arg("bg_as"),
      "(p_stokes, p_as, p_coinc) of one heralded-pair trial");

  m.def(
      "g2_from_counts",
      [](std::uint64_t nc, std::uint64_t na, std::uint64_t nb, std::uint64_t n) {
        const auto e = g2_from_counts(nc, na, nb, n);
        return py::make_tuple(e.value, e.std_err, e.upper_bound);
      },
      py::arg("n_coinc"), py::arg("n_a"), py::arg("n_b"), py::arg("n_trials"));

  m.def(
      "cauchy_schwarz",
      [](std::pair<double, double> sas, std::pair<double, double> ss, std::pair<double, double> asas) {
        auto est = [](std::pair<double, double> v) {
          CorrelationEstimate e;
          e.value = v.first;
          e.std_err = v.second;
          return e;
        };
        const auto r = cauchy_schwarz(est(sas), est(ss), est(asas));
        return py::dict(py::arg("ratio") = r.ratio, py::arg("excess") = r.excess, py::arg("sigma") = r.sigma,
                        py::arg("violated") = r.violated);
      },
      py::arg("g_sas"), py::arg("g_ss"), py::arg("g_asas"), "Each argument is (value, std_err).");

  m.def("feedback_enhancement", &feedback_enhancement, py::arg("p1"), py::arg("max_attempts") = 10);
  m.def("bandwidth_deconvolve", &bandwidth_deconvolve, py::arg("scan_fwhm_mhz"), py::arg("cavity_fwhm_mhz"));
  m.def("loop_retrieval_efficiency", &loop_retrieval_efficiency, py::arg("k"), py::arg("transmission"));

  m.def("_plan", &plan_json, py::arg("op"), py::arg("t3"), py::arg("t4"), py::arg("t5") = std::nullopt,
        py::arg("ratio") = std::nullopt, py::arg("fine_tune") = 0.0);
  m.def("_fit", &fit_json, py::arg("t"), py::arg("g2"), py::arg("err"), py::arg("form") = "rq", py::arg("seed") = 0);
  m.def("_reproduce", &reproduce_json, py::arg("target"), py::arg("seed") = 1, py::arg("trials") = std::nullopt,
        py::arg("out_dir") = "", py::call_guard<py::gil_scoped_release>());
  m.def("_simulate", &simulate_json, py::arg("config_text"), py::arg("out_dir") = "", py::arg("format") = "json",
        py::call_guard<py::gil_scoped_release>());
  m.def("reproduce_targets", &reproduce_targets);
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); });
}
