#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ddc/io.hpp"

namespace fs = std::filesystem;
using ddc::io::json;

namespace {

struct RunResult {
  int code = -1;
  std::string err;
};

fs::path work_root() {
  auto p = fs::temp_directory_path() / "ddc_cli_test";
  fs::create_directories(p);
  return p;
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
  fs::path errfile = dir / "stderr.txt";
  std::string cmd = std::string(DDC_CLI_PATH) + " " + args + " 2>" + errfile.string();
  int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (fs::exists(errfile)) {
    std::ifstream in(errfile);
    std::stringstream ss;
    ss << in.rdbuf();
    r.err = ss.str();
  }
  return r;
}

void write_config(const fs::path& path, const json& j) {
  ddc::io::write_json_file(path.string(), j);
}

json base_model(double discount = 0.9) {
  return json{{"num_actions", 2},
              {"state_dim", 1},
              {"discount", discount},
              {"random_coef_count", 1},
              {"horizon", "infinite"}};
}

json five_grid() { return json{{"axes", {{0.0, 1.0, 2.0, 3.0, 4.0}}}}; }

json ar1_kernel_json() {
  return json{{"kind", "ar1"},
              {"persistence", 0.6},
              {"noise_sd", {0.8}},
              {"drift", {{0.0}, {0.5}}}};
}

std::string slurp(const fs::path& p) { return ddc::io::read_text_file(p.string()); }

}  // namespace

TEST_CASE("validate accepts a sound config and rejects a broken kernel") {
  auto dir = work_root() / "validate";
  fs::create_directories(dir);
  json cfg = {{"model", base_model()}, {"grid", five_grid()}, {"kernel", ar1_kernel_json()}};
  write_config(dir / "good.json", cfg);
  auto out = (dir / "out").string();
  auto r = run_cli("validate --config " + (dir / "good.json").string() + " --out " + out, dir);
  CHECK(r.code == 0);
  auto report = ddc::io::load_json_file(out + "/validate.json");
  CHECK(report["ok"] == true);
  CHECK(report["violations"].empty());

  json bad = cfg;
  bad["kernel"] = {{"kind", "inline"},
                   {"probs", json::array()}};
  std::vector<std::vector<std::vector<double>>> probs(
      2, std::vector<std::vector<double>>(5, std::vector<double>(5, 0.0)));
  probs[0][0][0] = 0.9;  // first row sums to 0.9, everything else to 0
  bad["kernel"]["probs"] = probs;
  write_config(dir / "bad.json", bad);
  auto rb = run_cli("validate --config " + (dir / "bad.json").string() + " --out " +
                        (dir / "outb").string(),
                    dir);
  CHECK(rb.code == 1);
  auto breport = ddc::io::load_json_file((dir / "outb" / "validate.json").string());
  CHECK(breport["ok"] == false);
  CHECK(breport["violations"].size() > 0);
}

TEST_CASE("a myopic solve reproduces the static logit") {
  auto dir = work_root() / "solve";
  fs::create_directories(dir);
  json cfg = {{"model", base_model(0.0)},
              {"grid", five_grid()},
              {"kernel", ar1_kernel_json()},
              {"payoff", {{"gamma", json::array()}, {"beta", {1.3}}}}};
  write_config(dir / "cfg.json", cfg);
  auto out = (dir / "out").string();
  auto r = run_cli("solve --config " + (dir / "cfg.json").string() + " --out " + out, dir);
  REQUIRE(r.code == 0);
  auto result = ddc::io::load_json_file(out + "/result.json");
  CHECK(result["subcommand"] == "solve");
  CHECK(result["converged"] == true);

  std::istringstream ccp(slurp(out + "/ccp.csv"));
  std::string line;
  std::getline(ccp, line);
  CHECK(line == "period,state,action,prob");
  int rows = 0;
  while (std::getline(ccp, line)) {
    int period, state, action;
    double prob;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%d,%lf", &period, &state, &action,
                        &prob) == 4);
    double u1 = 1.3 * state;  // grid coordinate equals the index here
    double logit = std::exp(u1) / (1.0 + std::exp(u1));
    CHECK(prob == doctest::Approx(action == 1 ? logit : 1.0 - logit).epsilon(1e-10));
    ++rows;
  }
  CHECK(rows == 10);
}

TEST_CASE("simulate and estimate give a full round trip") {
  auto dir = work_root() / "roundtrip";
  fs::create_directories(dir);
  json sim_cfg = {
      {"seed", 321},
      {"model", base_model()},
      {"grid", five_grid()},
      {"kernel", ar1_kernel_json()},
      {"mixture",
       {{"components",
         {{{"weight", 0.6}, {"point_mass", {{"value", {0.6}}}}},
          {{"weight", 0.4}, {"point_mass", {{"value", {2.2}}}}}}}}},
      {"panel", {{"n", 400}, {"periods", 8}}}};
  write_config(dir / "sim.json", sim_cfg);
  auto sim_out = (dir / "sim_out").string();
  auto rs = run_cli("simulate --config " + (dir / "sim.json").string() + " --out " + sim_out, dir);
  REQUIRE(rs.code == 0);
  CHECK(fs::exists(sim_out + "/panel.csv"));
  CHECK(fs::exists(sim_out + "/types.csv"));
  auto sim_result = ddc::io::load_json_file(sim_out + "/result.json");
  CHECK(sim_result["subcommand"] == "simulate");
  CHECK(sim_result["n"] == 400);
  CHECK(sim_result["seed"] == 321);

  // types.csv lists one row per individual with the drawn coefficients.
  std::istringstream types(slurp(sim_out + "/types.csv"));
  std::string line;
  std::getline(types, line);
  CHECK(line == "id,b1");
  int rows = 0;
  while (std::getline(types, line)) ++rows;
  CHECK(rows == 400);

  json est_cfg = {{"seed", 321},
                  {"model", base_model()},
                  {"grid", five_grid()},
                  {"data", {{"panel", sim_out + "/panel.csv"}}},
                  {"transition", {{"method", "frequency"}}},
                  {"estimator",
                   {{"beta_lo", 0.0},
                    {"beta_hi", 3.0},
                    {"explicit_points", {{0.6}, {1.4}, {2.2}}},
                    {"gamma_lo", json::array()},
                    {"gamma_hi", json::array()}}}};
  write_config(dir / "est.json", est_cfg);
  auto est_out = (dir / "est_out").string();
  auto re = run_cli("estimate --config " + (dir / "est.json").string() + " --out " + est_out, dir);
  REQUIRE(re.code == 0);
  auto est_result = ddc::io::load_json_file(est_out + "/result.json");
  CHECK(est_result["subcommand"] == "estimate");
  CHECK(est_result["n"] == 400);
  CHECK(est_result["active_types"] >= 1);
  CHECK(fs::exists(est_out + "/cdf.csv"));
  CHECK(fs::exists(est_out + "/kernel.csv"));
  // The two point masses carry most of the weight.
  auto weights = est_result["sieve"]["weights"][0];
  double w0 = weights[0].get<double>();
  double w2 = weights[2].get<double>();
  CHECK(w0 + w2 > 0.8);
}

TEST_CASE("schema errors name the offending path and exit 1") {
  auto dir = work_root() / "schema";
  fs::create_directories(dir);
  json cfg = {{"model", base_model()}, {"grid", five_grid()}, {"kernel", ar1_kernel_json()}};
  cfg["model"]["bogus_key"] = 1;
  write_config(dir / "cfg.json", cfg);
  auto r = run_cli("validate --config " + (dir / "cfg.json").string() + " --out " +
                       (dir / "out").string(),
                   dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("bogus_key") != std::string::npos);
  CHECK(r.err.find("model") != std::string::npos);

  // Missing required section.
  json missing = {{"model", base_model()}};
  write_config(dir / "missing.json", missing);
  auto rm = run_cli("validate --config " + (dir / "missing.json").string() + " --out " +
                        (dir / "out2").string(),
                    dir);
  CHECK(rm.code == 1);
  CHECK(rm.err.find("grid") != std::string::npos);

  // Unknown CLI flag.
  auto rf = run_cli("validate --config " + (dir / "cfg.json").string() + " --frobnicate", dir);
  CHECK(rf.code == 1);
}

TEST_CASE("population rank and ident check agree on a two-type model") {
  auto dir = work_root() / "rankident";
  fs::create_directories(dir);
  json types = {{"betas", {{0.5}, {2.0}}}, {"weights", {0.6, 0.4}}};
  json cfg = {{"model", base_model()},
              {"grid", five_grid()},
              {"kernel", ar1_kernel_json()},
              {"payoff", {{"gamma", json::array()}}},
              {"types", types},
              {"rank", {{"a1", 1}, {"a2", 0}, {"a3", 1}, {"x1", 2}, {"mode", "population"}}}};
  write_config(dir / "rank.json", cfg);
  auto rank_out = (dir / "rank_out").string();
  auto rr = run_cli("rank --config " + (dir / "rank.json").string() + " --out " + rank_out, dir);
  REQUIRE(rr.code == 0);
  auto rank_result = ddc::io::load_json_file(rank_out + "/rank.json");
  CHECK(rank_result["rank"] == 2);
  auto sv = rank_result["singular_values"];
  REQUIRE(sv.size() >= 3);
  CHECK(sv[2].get<double>() / sv[0].get<double>() < 1e-10);

  json icfg = {{"model", base_model()},
               {"grid", five_grid()},
               {"kernel", ar1_kernel_json()},
               {"payoff", {{"gamma", json::array()}}},
               {"types", types},
               {"ident", {{"a1", 1}, {"a4", 1}, {"x1", 2}, {"x4", 3}}}};
  write_config(dir / "ident.json", icfg);
  auto ident_out = (dir / "ident_out").string();
  auto ri = run_cli("ident-check --config " + (dir / "ident.json").string() + " --out " +
                        ident_out,
                    dir);
  REQUIRE(ri.code == 0);
  auto ident_result = ddc::io::load_json_file(ident_out + "/ident.json");
  CHECK(ident_result["residual_342"].get<double>() < 1e-10);
  CHECK(ident_result["max_ccp_error"].get<double>() < 1e-8);

  // Duplicated types: the collision diagnostic is reported with exit code 2.
  json dup = icfg;
  dup["types"] = {{"betas", {{1.0}, {1.0}}}, {"weights", {0.5, 0.5}}};
  write_config(dir / "dup.json", dup);
  auto rd = run_cli("ident-check --config " + (dir / "dup.json").string() + " --out " +
                        (dir / "dup_out").string(),
                    dir);
  CHECK(rd.code == 2);
  auto dup_result = ddc::io::load_json_file((dir / "dup_out" / "ident.json").string());
  CHECK(dup_result.contains("recovery_error"));
  CHECK(!dup_result.contains("recovery"));
}

TEST_CASE("same seed gives byte-identical outputs at any thread count") {
  auto dir = work_root() / "determinism";
  fs::create_directories(dir);
  json cfg = {{"montecarlo",
               {{"design", "baseline"},
                {"sample_sizes", {50}},
                {"replications", 2},
                {"use_true_kernel", true}}}};
  write_config(dir / "mc.json", cfg);
  auto out1 = (dir / "mc1").string();
  auto out2 = (dir / "mc2").string();
  auto r1 = run_cli("montecarlo --config " + (dir / "mc.json").string() +
                        " --seed 5 --threads 1 --out " + out1,
                    dir);
  auto r2 = run_cli("montecarlo --config " + (dir / "mc.json").string() +
                        " --seed 5 --threads 4 --out " + out2,
                    dir);
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  CHECK(slurp(out1 + "/summary.json") == slurp(out2 + "/summary.json"));
  CHECK(slurp(out1 + "/table.csv") == slurp(out2 + "/table.csv"));
  // Different seed, different results.
  auto out3 = (dir / "mc3").string();
  auto r3 = run_cli("montecarlo --config " + (dir / "mc.json").string() +
                        " --seed 6 --threads 1 --out " + out3,
                    dir);
  REQUIRE(r3.code == 0);
  CHECK(slurp(out1 + "/summary.json") != slurp(out3 + "/summary.json"));

  json sim_cfg = {{"model", base_model()},
                  {"grid", five_grid()},
                  {"kernel", ar1_kernel_json()},
                  {"mixture",
                   {{"components",
                     {{{"weight", 1.0},
                       {"truncated_normal",
                        {{"mean", {1.5}}, {"sd", {1.0}}, {"lo", 0.0}, {"hi", 6.0}}}}}}}},
                  {"panel", {{"n", 200}, {"periods", 5}}}};
  write_config(dir / "sim.json", sim_cfg);
  auto s1 = (dir / "s1").string();
  auto s2 = (dir / "s2").string();
  REQUIRE(run_cli("simulate --config " + (dir / "sim.json").string() +
                      " --seed 11 --threads 2 --out " + s1,
                  dir)
              .code == 0);
  REQUIRE(run_cli("simulate --config " + (dir / "sim.json").string() +
                      " --seed 11 --threads 7 --out " + s2,
                  dir)
              .code == 0);
  CHECK(slurp(s1 + "/panel.csv") == slurp(s2 + "/panel.csv"));
  CHECK(slurp(s1 + "/types.csv") == slurp(s2 + "/types.csv"));
}
