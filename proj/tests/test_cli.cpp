#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(HQM_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("hqm_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("help and version") {
  const Run h = run("--help");
  CHECK(h.code == 0);
  CHECK(h.out.find("HQM_THREADS") != std::string::npos);
  CHECK(h.out.find("simulate") != std::string::npos);
  CHECK(run("--version").code == 0);
  CHECK(run("bogus").code == 2);
  CHECK(run("").code == 2);
}

TEST_CASE("simulate exit codes") {
  const auto d = scratch("sim");
  write(d / "ok.json", R"({"preset": "fig3", "seed": 5, "n_trials": 5000, "pair": {"tau1_ns": 30}})");
  write(d / "bad.json", R"({"preset": "fig3", "seed": 5, "ford": {"chi": 2}})");
  write(d / "noseed.json", R"({"preset": "fig3"})");

  const Run ok = run("simulate --config " + (d / "ok.json").string() + " --out " + (d / "o").string());
  CHECK(ok.code == 0);
  CHECK(fs::exists(d / "o" / "estimates.json"));
  CHECK(fs::exists(d / "o" / "records.csv"));

  const Run csv = run("simulate --config " + (d / "ok.json").string() + " --format csv --out " + (d / "c").string());
  CHECK(csv.code == 0);
  CHECK(fs::exists(d / "c" / "estimates.csv"));

  const Run bad = run("simulate --config " + (d / "bad.json").string() + " --out " + (d / "b").string());
  CHECK(bad.code == 2);
  CHECK(bad.out.find("ford") != std::string::npos);
  CHECK(run("simulate --config " + (d / "noseed.json").string()).code == 2);
  CHECK(run("simulate --config " + (d / "missing.json").string()).code == 2);
  CHECK(run("simulate --config " + (d / "ok.json").string() + " --trials 0").code == 2);
  fs::remove_all(d);
}

TEST_CASE("plan exit codes") {
  const Run fifo = run("plan --op fifo --t3 10 --t4 10");
  CHECK(fifo.code == 0);
  const auto j = nlohmann::json::parse(fifo.out);
  CHECK(j.contains("config_hash"));

  CHECK(run("plan --op fifo --t3 10 --t4 -10").code == 3);
  CHECK(run("plan --op fifo --t3 3 --t4 3").code == 3);
  CHECK(run("plan --op fine-tune --t3 30 --t4 90 --fine-tune 3").code == 2);
  CHECK(run("plan --op lifo --t3 10 --t4 10").code == 2);

  const auto d = scratch("plan");
  const Run t = run("plan --table1 --out " + d.string());
  CHECK(t.code == 0);
  CHECK(fs::exists(d / "table1_plans.json"));
  const Run ev = run("plan --op chop --t3 10 --t4 10 --t5 20 --ratio 1:3 --format csv --out " + d.string());
  CHECK(ev.code == 0);
  CHECK(slurp(d / "schedule.csv").find("time_ns") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("fit recovers an exponential lifetime") {
  const auto d = scratch("fit");
  std::ostringstream csv;
  csv << "t_ns,g2,err\n";
  for (int i = 0; i < 12; ++i) {
    const double t = 30.0 + 100.0 * i;
    csv << t << ',' << 20.0 * std::exp(-t / 500.0) << ',' << 0.2 << '\n';
  }
  write(d / "exp.csv", csv.str());
  const Run r = run("fit --input " + (d / "exp.csv").string() + " --form exp --out " + d.string());
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(d / "fit.json"));
  CHECK(std::fabs(j["lifetime_1e_ns"]["peak"].get<double>() - 500.0) < 25.0);

  write(d / "one.csv", "t_ns,g2,err\n30,20,1\n");
  CHECK(run("fit --input " + (d / "one.csv").string()).code == 2);
  CHECK(run("fit --input " + (d / "exp.csv").string() + " --form cubic").code == 2);
  fs::remove_all(d);
}

TEST_CASE("reproduce exit codes") {
  const auto d = scratch("rep");
  const Run ok = run("reproduce table1 --out " + d.string());
  CHECK(ok.code == 0);
  CHECK(ok.out.find("RESULT PASS") != std::string::npos);
  CHECK(fs::exists(d / "table1.json"));
  const Run starved = run("reproduce fig3b --trials 100 --out " + d.string());
  CHECK(starved.code == 4);
  CHECK(starved.out.find("RESULT FAIL") != std::string::npos);
  CHECK(run("reproduce nothing --out " + d.string()).code == 2);
  CHECK(run("reproduce fig2 --trials 0 --out " + d.string()).code == 2);
  fs::remove_all(d);
}
