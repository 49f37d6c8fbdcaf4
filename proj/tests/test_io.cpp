#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ddc/error.hpp"
#include "ddc/io.hpp"
#include "ddc/mixture.hpp"
#include "ddc/model.hpp"
#include "ddc/montecarlo.hpp"
#include "ddc/simulate.hpp"

using namespace ddc;
using ddc::io::json;

namespace {

Panel tiny_panel() {
  Panel p;
  p.n = 2;
  p.periods = 3;
  p.state = {0, 2, 1, 1, 0, 2};
  p.action = {1, 0, 1, 0, 0, 1};
  return p;
}

}  // namespace

TEST_CASE("format_double round-trips exactly and is minimal") {
  for (double x : {0.1, 1.0, -2.5, 1e-300, 3.141592653589793, 0.0, 1e17,
                   0.30000000000000004, -0.0}) {
    std::string s = io::format_double(x);
    CHECK(std::stod(s) == x);
  }
  CHECK(io::format_double(1.0) == "1");
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(-2.0) == "-2");
  CHECK(io::format_double(0.5) == "0.5");
}

TEST_CASE("text and json files round-trip") {
  auto dir = std::filesystem::temp_directory_path() / "ddc_io_test";
  std::filesystem::create_directories(dir);
  auto path = (dir / "t.txt").string();
  io::write_text_file(path, "hello\nworld\n");
  CHECK(io::read_text_file(path) == "hello\nworld\n");
  auto jpath = (dir / "t.json").string();
  json j = {{"b", 1}, {"a", {1.5, 2.5}}};
  io::write_json_file(jpath, j);
  auto back = io::load_json_file(jpath);
  CHECK(back["b"] == 1);
  CHECK(back["a"][1] == 2.5);
  // Insertion order is preserved on disk.
  auto text = io::read_text_file(jpath);
  CHECK(text.find("\"b\"") < text.find("\"a\""));
  CHECK_THROWS_AS(io::read_text_file((dir / "missing.txt").string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unknown config keys are rejected by name") {
  json j = {{"num_actions", 2}, {"state_dim", 1}, {"discount", 0.9},
            {"random_coef_count", 1}, {"horizon", "infinite"}, {"bogus", 1}};
  try {
    io::parse_model(j);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("model") != std::string::npos);
  }
}

TEST_CASE("model json round-trips through echo and parse") {
  ModelSpec spec;
  spec.num_actions = 3;
  spec.state_dim = 2;
  spec.discount = 0.85;
  spec.random_coef_count = 2;
  spec.intercept_mode = false;
  spec.horizon = Horizon::finite(5);
  auto j = io::echo_model(spec);
  auto back = io::parse_model(j);
  CHECK(back.num_actions == spec.num_actions);
  CHECK(back.state_dim == spec.state_dim);
  CHECK(back.discount == spec.discount);
  CHECK(back.random_coef_count == spec.random_coef_count);
  CHECK(back.horizon.is_finite());
  CHECK(back.horizon.periods == 5);

  spec.horizon = Horizon::infinite();
  auto j2 = io::echo_model(spec);
  CHECK(io::parse_model(j2).horizon.is_finite() == false);
}

TEST_CASE("grid json accepts axes or points but not both") {
  json axes = {{"axes", {{0.0, 1.0}, {2.0, 3.0}}}};
  auto g = io::parse_grid(axes);
  CHECK(g.dim == 2);
  CHECK(g.size() == 4);
  json points = {{"points", {{0.5}, {1.5}, {2.5}}}};
  auto g2 = io::parse_grid(points);
  CHECK(g2.size() == 3);
  CHECK(g2.dim == 1);
  json both = {{"axes", {{0.0, 1.0}}}, {"points", {{0.5}}}};
  CHECK_THROWS_AS(io::parse_grid(both), ConfigError);
  json neither = json::object();
  CHECK_THROWS_AS(io::parse_grid(neither), ConfigError);
  // Round trip.
  auto echoed = io::echo_grid(g);
  auto back = io::parse_grid(echoed);
  CHECK(back.coords == g.coords);
  CHECK(back.dim == g.dim);
}

TEST_CASE("kernel json supports ar1, uniform, inline, and csv") {
  StateGrid grid = StateGrid::product({{0.0, 1.0, 2.0}});
  json ar1 = {{"kind", "ar1"},
              {"persistence", 0.6},
              {"noise_sd", {0.8}},
              {"drift", {{0.0}, {0.5}}}};
  auto k = io::parse_kernel(ar1, grid, 2, ".", "kernel");
  auto direct = ar1_kernel(grid, 2, 0.6, std::vector<double>{0.8}, {{0.0}, {0.5}});
  CHECK(k.probs == direct.probs);

  json uni = {{"kind", "uniform"}};
  auto ku = io::parse_kernel(uni, grid, 2, ".", "kernel");
  CHECK(ku.at(0, 0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  auto echoed = io::echo_kernel(k);
  auto back = io::parse_kernel(echoed, grid, 2, ".", "kernel");
  CHECK(back.probs == k.probs);

  auto dir = std::filesystem::temp_directory_path() / "ddc_io_kernel";
  std::filesystem::create_directories(dir);
  io::write_text_file((dir / "k.csv").string(), io::kernel_csv(k));
  json csv = {{"kind", "csv"}, {"path", "k.csv"}};
  auto kc = io::parse_kernel(csv, grid, 2, dir.string(), "kernel");
  CHECK(kc.probs == k.probs);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mixture json round-trips") {
  json j = {{"components",
             {{{"weight", 0.4},
               {"truncated_normal",
                {{"mean", {1.5}}, {"sd", {1.0}}, {"lo", 0.0}, {"hi", 50.0}}}},
              {{"weight", 0.6}, {"point_mass", {{"value", {2.5}}}}}}}};
  auto mix = io::parse_mixture(j);
  REQUIRE(mix.components.size() == 2);
  CHECK(mix.dim() == 1);
  auto echoed = io::echo_mixture(mix);
  auto back = io::parse_mixture(echoed);
  CHECK(back.components.size() == 2);
  CHECK(back.cdf1(2.5) == doctest::Approx(mix.cdf1(2.5)).epsilon(1e-15));
  json bad = {{"components", json::array()}};
  CHECK_THROWS_AS(io::parse_mixture(bad), ConfigError);
}

TEST_CASE("panel csv round-trips exactly") {
  StateGrid grid = StateGrid::product({{0.0, 1.0, 2.0}});
  Panel p = tiny_panel();
  auto text = io::panel_csv(p, grid);
  CHECK(text.rfind("id,t,x1,a\n", 0) == 0);
  auto back = io::parse_panel_csv(text, grid);
  CHECK(back.n == p.n);
  CHECK(back.periods == p.periods);
  CHECK(back.state == p.state);
  CHECK(back.action == p.action);

  StateGrid g2 = StateGrid::product({{0.0, 1.0}, {0.0, 1.0, 2.0}});
  Panel q = tiny_panel();
  auto t2 = io::panel_csv(q, g2);
  CHECK(t2.rfind("id,t,x1,x2,a\n", 0) == 0);
  auto b2 = io::parse_panel_csv(t2, g2);
  CHECK(b2.state == q.state);
}

TEST_CASE("panel csv errors name the problem") {
  StateGrid grid = StateGrid::product({{0.0, 1.0, 2.0}});
  CHECK_THROWS_AS(io::parse_panel_csv("id,t,wrong,a\n0,0,0,0\n", grid), ConfigError);
  // A missing (id, t) pair leaves a ragged panel.
  CHECK_THROWS_AS(io::parse_panel_csv("id,t,x1,a\n0,0,0,1\n0,1,1,0\n1,0,2,1\n", grid),
                  ConfigError);
  // Duplicate cell.
  CHECK_THROWS_AS(io::parse_panel_csv("id,t,x1,a\n0,0,0,1\n0,0,1,0\n", grid),
                  ConfigError);
  // Non-numeric field.
  CHECK_THROWS_AS(io::parse_panel_csv("id,t,x1,a\n0,0,zero,1\n", grid), ConfigError);
  // Off-grid coordinates snap to the nearest point rather than failing.
  auto p = io::parse_panel_csv("id,t,x1,a\n0,0,0.9,1\n", grid);
  CHECK(p.state[0] == 1);
}

TEST_CASE("kernel csv round-trips exactly and checks coverage") {
  StateGrid grid = StateGrid::product({{0.0, 1.0, 2.0, 3.0, 4.0}});
  auto kernel = ar1_kernel(grid, 2, 0.6, std::vector<double>{0.8}, {{0.0}, {0.5}});
  auto text = io::kernel_csv(kernel);
  CHECK(text.rfind("a,from,to,prob\n", 0) == 0);
  auto back = io::parse_kernel_csv(text);
  CHECK(back.num_actions == 2);
  CHECK(back.num_states == 5);
  CHECK(back.probs == kernel.probs);

  // Dropping one row breaks completeness.
  auto pos = text.find_last_of('\n', text.size() - 2);
  CHECK_THROWS_AS(io::parse_kernel_csv(text.substr(0, pos + 1)), ConfigError);
  // Duplicate rows are rejected.
  auto dup = text + "1,4,4," + io::format_double(kernel.at(1, 4, 4)) + "\n";
  CHECK_THROWS_AS(io::parse_kernel_csv(dup), ConfigError);
}

TEST_CASE("value and ccp csv formats") {
  ValueFunction vf;
  vf.horizon = Horizon::infinite();
  vf.v = {{1.5, -2.0}};
  auto text = io::value_csv(vf);
  CHECK(text == "period,state,value\n0,0,1.5\n0,1,-2\n");

  ValueFunction fin;
  fin.horizon = Horizon::finite(2);
  fin.v = {{1.0, 2.0}, {3.0, 4.0}};
  auto ft = io::value_csv(fin);
  CHECK(ft.find("1,0,1\n") != std::string::npos);
  CHECK(ft.find("2,1,4\n") != std::string::npos);

  CcpTable table;
  table.num_states = 2;
  table.num_actions = 2;
  table.probs = {0.25, 0.75, 0.5, 0.5};
  auto ct = io::ccp_csv({table}, false);
  CHECK(ct == "period,state,action,prob\n0,0,0,0.25\n0,0,1,0.75\n0,1,0,0.5\n0,1,1,0.5\n");
}

TEST_CASE("cdf csv lists the staircase") {
  StepCdf cdf{{0.5, 2.0}, {0.25, 1.0}};
  CHECK(io::cdf_csv(cdf) == "b,cdf\n0.5,0.25\n2,1\n");
}

TEST_CASE("estimate json carries results but no wall-clock fields") {
  EstimateResult r;
  r.gamma = {0.5};
  r.loglik = -123.25;
  r.active_types = 3;
  r.search_converged = true;
  r.profile_evals = 17;
  r.em_iterations = 210;
  r.inner_residual = 1e-10;
  r.seconds = 9.75;
  r.sieve.points = {{1.0}, {2.0}};
  r.sieve.cells = 1;
  r.sieve.weights = {0.25, 0.75};
  auto j = io::estimate_json(r);
  CHECK(j["gamma"][0] == 0.5);
  CHECK(j["loglik"] == -123.25);
  CHECK(j["active_types"] == 3);
  CHECK(j["sieve"]["weights"][0][1] == 0.75);
  CHECK(j.dump().find("seconds") == std::string::npos);
}

TEST_CASE("mc table lists one column per sample size") {
  McSummary s;
  McCell a;
  a.n = 100;
  a.grid_points = 13;
  a.replications = 2;
  a.bias = {0.5};
  a.bias_scaled = {5.0};
  a.variance = {0.25};
  a.variance_scaled = {25.0};
  a.mse = {0.5};
  a.mse_scaled = {50.0};
  a.mise = 0.125;
  a.iae_mean = 0.3;
  a.iae_min = 0.2;
  a.iae_max = 0.4;
  a.active_mean = 3.5;
  a.active_min = 3;
  a.active_max = 4;
  McCell b = a;
  b.n = 500;
  b.grid_points = 19;
  s.cells = {a, b};
  auto text = io::mc_table_csv(s);
  CHECK(text.rfind("metric,n=100,n=500\n", 0) == 0);
  CHECK(text.find("bias_gamma1,0.5,0.5\n") != std::string::npos);
  CHECK(text.find("sqrt_n_bias_gamma1,5,5\n") != std::string::npos);
  CHECK(text.find("grid_points,13,19\n") != std::string::npos);
  CHECK(text.find("mise,0.125,0.125\n") != std::string::npos);
  CHECK(text.find("failures,0,0\n") != std::string::npos);

  auto j = io::mc_summary_json(s);
  CHECK(j["cells"][0]["n"] == 100);
  CHECK(j.dump().find("seconds") == std::string::npos);
  auto t = io::mc_timings_json(s);
  CHECK(t.dump().find("seconds") != std::string::npos);
}

TEST_CASE("violations serialize with their location") {
  std::vector<Violation> v = {{"row_sum", 0, 1, -1, "row does not sum to 1"}};
  auto j = io::violations_json(v);
  CHECK(j["ok"] == false);
  CHECK(j["violations"][0]["code"] == "row_sum");
  CHECK(j["violations"][0]["action"] == 0);
  CHECK(j["violations"][0]["i"] == 1);
  CHECK(io::violations_json({})["ok"] == true);
}
