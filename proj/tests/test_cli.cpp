#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

struct CliResult {
  std::string output;
  int status = -1;
};

CliResult run_cli(const std::string& args, bool merge_stderr = false) {
  std::string cmd = std::string(POSITIVITY_CLI_PATH) + " " + args +
                    (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
  int rc = pclose(pipe);
  CliResult r;
  r.output = std::move(out);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::string table1_args() {
  return "--data " + testutil::data_path("table1.csv") + " --covariates V,W";
}

const char* kDropOrigin = " --restrict '!(V=0&W=0)'";

}  // namespace

TEST_CASE("cli audit names the empty-arm cell") {
  CliResult r = run_cli("audit " + table1_args());
  REQUIRE(r.status == 0);
  json rep = json::parse(r.output);
  CHECK(rep["schema_version"] == 1);
  CHECK(rep["command"] == "audit");
  CHECK(rep["dataset"]["n"] == 246);
  CHECK(rep["sample"]["verdict"] == "violated");
  CHECK(rep["exit_code"] == 0);

  bool found = false;
  for (const auto& f : rep["sample"]["findings"]) {
    if (f["pattern"] != json::array({0, 0})) continue;
    found = true;
    CHECK(f["n_by_arm"] == json::array({0, 15}));
    CHECK(f["exact_violation"] == json::array({true, false}));
    CHECK(f["classification"] == "indeterminate");
  }
  CHECK(found);
}

TEST_CASE("cli audit checks plans against a declared spec") {
  CliResult r =
      run_cli("audit --spec table1-s1 --plan " + testutil::data_path("plan_selective.csv"));
  REQUIRE(r.status == 0);
  json rep = json::parse(r.output);
  CHECK(rep["structural"]["verdict"] == "violated");
  CHECK(rep["plan"]["verdict"] == "violated");
  bool found = false;
  for (const auto& f : rep["plan"]["findings"]) {
    if (f["pattern"] != json::array({0, 0})) continue;
    found = true;
    CHECK(f["plan_value"] == 0.0);
    CHECK(f["deterministic_violation"] == json::array({true, false}));
  }
  CHECK(found);

  CliResult ok = run_cli("audit --spec table1-s2 --plan all-treat");
  REQUIRE(ok.status == 0);
  CHECK(json::parse(ok.output)["plan"]["verdict"] == "satisfied");
}

TEST_CASE("cli blocked estimates exit 2 and identify the cell") {
  CliResult g = run_cli("estimate " + table1_args() + " --estimand ace");
  CHECK(g.status == 2);
  json rep = json::parse(g.output);
  CHECK(rep["error"]["code"] == "UndefinedCellMean");
  CHECK(rep["error"]["pattern"] == json::array({0, 0}));
  CHECK(rep["error"]["arm"] == 0);
  CHECK(rep["exit_code"] == 2);
  CHECK(rep["positivity"]["verdict"] == "violated");

  CliResult w = run_cli("estimate " + table1_args() + " --estimand ace --method ipw");
  CHECK(w.status == 2);
  CHECK(json::parse(w.output)["error"]["code"] == "PositivityViolation");
}

TEST_CASE("cli restriction unblocks the ace") {
  CliResult g = run_cli("estimate " + table1_args() + kDropOrigin + " --estimand ace");
  REQUIRE(g.status == 0);
  json rep = json::parse(g.output);
  CHECK(rep["estimate"]["method"] == "gcomp");
  CHECK(rep["estimate"]["n_used"] == 231);
  CHECK(std::abs(rep["estimate"]["value"].get<double>() + 0.14047962357559882) < 1e-11);
  CHECK(rep["warnings"].empty());

  CliResult w = run_cli("estimate " + table1_args() + kDropOrigin +
                        " --estimand ace --method ipw");
  REQUIRE(w.status == 0);
  json wrep = json::parse(w.output);
  CHECK(wrep["estimate"]["method"] == "ipw");
  CHECK(wrep["model"]["kind"] == "empirical");
  CHECK(std::abs(wrep["estimate"]["value"].get<double>() + 0.14047962357559882) < 1e-11);
}

TEST_CASE("cli weakened estimands") {
  CliResult nat = run_cli("estimate " + table1_args() + " --estimand natural");
  REQUIRE(nat.status == 0);
  CHECK(std::abs(json::parse(nat.output)["estimate"]["value"].get<double>() - 78.0 / 246.0) <
        1e-11);

  CliResult plan = run_cli("estimate " + table1_args() + " --estimand plan --plan all-treat");
  REQUIRE(plan.status == 0);
  CHECK(std::abs(json::parse(plan.output)["estimate"]["value"].get<double>() -
                 0.28352085378438924) < 1e-11);

  CliResult blocked = run_cli("estimate " + table1_args() + " --estimand plan --plan " +
                              testutil::data_path("plan_selective.csv"));
  CHECK(blocked.status == 2);

  CliResult att_full = run_cli("estimate " + table1_args() + " --estimand att");
  CHECK(att_full.status == 2);
  CliResult att = run_cli("estimate " + table1_args() + kDropOrigin + " --estimand att");
  REQUIRE(att.status == 0);
  CHECK(std::abs(json::parse(att.output)["estimate"]["value"].get<double>() +
                 0.1861301775147929) < 1e-11);
}

TEST_CASE("cli bounds survive a blocked point estimate") {
  CliResult r = run_cli("estimate " + table1_args() + " --estimand ace --bounds");
  CHECK(r.status == 2);
  json rep = json::parse(r.output);
  CHECK(rep["error"]["code"] == "UndefinedCellMean");
  REQUIRE(rep.contains("bounds"));
  CHECK(std::abs(rep["bounds"]["lower"].get<double>() + 0.16443411807302163) < 1e-9);
  CHECK(std::abs(rep["bounds"]["upper"].get<double>() + 0.10345850831692409) < 1e-9);
  CHECK(std::abs(rep["bounds"]["violating_mass"].get<double>() - 15.0 / 246.0) < 1e-12);
}

TEST_CASE("cli counts input matches row input") {
  CliResult rows = run_cli("estimate " + table1_args() + kDropOrigin + " --estimand ace");
  CliResult counts = run_cli("estimate --data " + testutil::data_path("table1_counts.csv") +
                             " --counts --covariates V,W" + kDropOrigin + " --estimand ace");
  REQUIRE(rows.status == 0);
  REQUIRE(counts.status == 0);
  CHECK(json::parse(counts.output)["estimate"]["value"] ==
        json::parse(rows.output)["estimate"]["value"]);
}

TEST_CASE("cli tree propensities control blocking") {
  std::string base = "estimate " + table1_args() + " --method ipw --ps tree";
  CliResult blocked = run_cli(base + " --estimand ace --min-leaf 5");
  CHECK(blocked.status == 2);
  CHECK(json::parse(blocked.output)["error"]["code"] == "PositivityViolation");

  CliResult smoothed = run_cli(base + " --estimand plan --plan all-treat --min-leaf 16");
  REQUIRE(smoothed.status == 0);
  json rep = json::parse(smoothed.output);
  CHECK(rep["model"]["kind"] == "tree");
  double v = rep["estimate"]["value"].get<double>();
  CHECK(v > 0.0);
  CHECK(v < 1.0);
}

TEST_CASE("cli near-violation warnings honor epsilon") {
  CliResult r = run_cli("estimate " + table1_args() + kDropOrigin +
                        " --estimand ace --epsilon 0.3");
  REQUIRE(r.status == 0);
  json rep = json::parse(r.output);
  bool has_near = false;
  for (const auto& w : rep["warnings"])
    if (w.get<std::string>().find("near-violation") != std::string::npos) has_near = true;
  CHECK(has_near);
  CHECK(rep["positivity"]["verdict"] == "satisfied");
}

TEST_CASE("cli usage errors exit 64") {
  CliResult unknown = run_cli("estimate --bogus", true);
  CHECK(unknown.status == 64);
  CHECK(unknown.output.find("UsageError") != std::string::npos);

  CliResult no_input = run_cli("audit");
  CHECK(no_input.status == 64);
  CHECK(json::parse(no_input.output)["error"]["code"] == "UsageError");

  CliResult no_cov = run_cli("estimate --data " + testutil::data_path("table1.csv"));
  CHECK(no_cov.status == 64);
  CHECK(json::parse(no_cov.output)["error"]["code"] == "UsageError");

  CliResult bad_estimand = run_cli("estimate " + table1_args() + " --estimand foo", true);
  CHECK(bad_estimand.status == 64);
}

TEST_CASE("cli output is byte-identical for fixed seeds") {
  std::string cmd = "estimate " + table1_args() + kDropOrigin +
                    " --estimand ace --method ipw --ps forest --n-trees 20 --seed 4242 --ci 50";
  CliResult a = run_cli(cmd);
  CliResult b = run_cli(cmd);
  REQUIRE(a.status == 0);
  CHECK(!a.output.empty());
  CHECK(a.output == b.output);
  json rep = json::parse(a.output);
  CHECK(rep["interval"]["replicates"] == 50);
  CHECK(rep["interval"]["lower"].get<double>() <= rep["interval"]["upper"].get<double>());

  std::string sim = "simulate --spec table1-s1 --n-grid 25,50 --replicates 40 --seed 7";
  CliResult s1 = run_cli(sim);
  CliResult s2 = run_cli(sim);
  REQUIRE(s1.status == 0);
  CHECK(s1.output == s2.output);
  CHECK(s1.output.rfind("n,cell,analytic,mc_frequency,replicates,seed\n", 0) == 0);
}

TEST_CASE("cli --out writes the report to a file") {
  std::string base = "audit " + table1_args() + " --spec table1-s2";
  CliResult direct = run_cli(base);
  REQUIRE(direct.status == 0);

  std::string path = "/tmp/positivity_cli_out_test.json";
  CliResult filed = run_cli(base + " --out " + path);
  REQUIRE(filed.status == 0);
  CHECK(filed.output.empty());

  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::remove(path.c_str());

  // The argv echo differs by the --out flag; compare everything else.
  json a = json::parse(direct.output);
  json b = json::parse(ss.str());
  a.erase("argv");
  b.erase("argv");
  CHECK(a == b);
}
