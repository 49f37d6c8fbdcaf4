#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>

#include "ddc/error.hpp"
#include "ddc/ident.hpp"
#include "ddc/io.hpp"
#include "ddc/mixture.hpp"
#include "ddc/montecarlo.hpp"
#include "ddc/rank.hpp"
#include "ddc/simulate.hpp"
#include "ddc/solver.hpp"
#include "ddc/threading.hpp"
#include "ddc/transition.hpp"

// Exit codes: 0 success, 1 usage/schema error, 2 numeric or convergence
// failure. All file outputs are deterministic for a given config + seed,
// whatever --threads says; wall-clock goes to stderr and timings.json only.

namespace {

using ddc::io::json;

constexpr std::uint64_t kDefaultSeed = 20250815;

struct Args {
  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed = -1;  // <0 = take the config's
  int threads = -1;        // <0 = take the config's
};

struct Run {
  json config;
  std::string base_dir;
  std::filesystem::path out;
  std::uint64_t seed = kDefaultSeed;
};

Run prepare(const Args& args) {
  Run run;
  run.config = ddc::io::load_json_file(args.config_path);
  ddc::io::check_keys(run.config, "config",
                      {"seed", "threads", "model", "grid", "kernel", "payoff",
                       "mixture", "panel", "data", "estimator", "solver",
                       "transition", "montecarlo", "types", "rank", "ident"});
  run.base_dir = std::filesystem::path(args.config_path).parent_path().string();
  run.out = args.out_dir;
  std::filesystem::create_directories(run.out);
  std::int64_t seed =
      args.seed >= 0
          ? args.seed
          : ddc::io::get_int(run.config, "config", "seed",
                             static_cast<std::int64_t>(kDefaultSeed));
  if (seed < 0) throw ddc::ConfigError("config: \"config.seed\" must be >= 0");
  run.seed = static_cast<std::uint64_t>(seed);
  int threads =
      args.threads >= 0
          ? args.threads
          : static_cast<int>(ddc::io::get_int(run.config, "config", "threads", 0));
  ddc::set_max_threads(threads);
  return run;
}

const json& section(const Run& run, const char* key) {
  return ddc::io::require(run.config, "config", key);
}

struct ModelBundle {
  ddc::ModelSpec spec;
  ddc::StateGrid grid;
  ddc::TransitionKernel kernel;
};

ModelBundle load_model(const Run& run, bool need_kernel) {
  ModelBundle b;
  b.spec = ddc::io::parse_model(section(run, "model"));
  b.grid = ddc::io::parse_grid(section(run, "grid"));
  if (b.spec.state_dim != b.grid.dim)
    throw ddc::ConfigError("config: \"grid\" has dimension " +
                           std::to_string(b.grid.dim) +
                           " but \"model.state_dim\" is " +
                           std::to_string(b.spec.state_dim));
  if (need_kernel)
    b.kernel = ddc::io::parse_kernel(section(run, "kernel"), b.grid,
                                     b.spec.num_actions, run.base_dir);
  return b;
}

ddc::Panel load_panel(const Run& run, const ModelBundle& b) {
  const json& data = section(run, "data");
  ddc::io::check_keys(data, "data", {"panel"});
  const json& p = ddc::io::require(data, "data", "panel");
  if (!p.is_string())
    throw ddc::ConfigError("config: \"data.panel\" must be a string path");
  std::filesystem::path path(p.get<std::string>());
  if (path.is_relative() && !run.base_dir.empty())
    path = std::filesystem::path(run.base_dir) / path;
  ddc::Panel panel =
      ddc::io::parse_panel_csv(ddc::io::read_text_file(path.string()), b.grid);
  panel.check(b.grid, b.spec.num_actions);
  return panel;
}

struct StepOne {
  ddc::TransitionKernel kernel;
  json report;
};

// Step 1 for data-driven subcommands: estimate the kernel from the panel, or
// take the config's kernel verbatim when transition.method is "none".
StepOne step_one(const Run& run, const ModelBundle& b, const ddc::Panel& panel) {
  ddc::io::TransitionOptions opts;
  if (run.config.contains("transition"))
    opts = ddc::io::parse_transition_options(run.config.at("transition"));
  StepOne out;
  out.report["method"] = opts.method;
  if (opts.method == "none") {
    out.kernel = ddc::io::parse_kernel(section(run, "kernel"), b.grid,
                                       b.spec.num_actions, run.base_dir);
    return out;
  }
  ddc::TransitionEstimate te =
      opts.method == "frequency"
          ? ddc::estimate_frequency(panel, b.grid, b.spec.num_actions)
          : ddc::estimate_kernel_density(panel, b.grid, b.spec.num_actions,
                                         opts.bandwidth_to, opts.bandwidth_from);
  json uniform = json::array();
  for (const auto& [a, from] : te.uniform_cells)
    uniform.push_back(json::array({a, from}));
  out.report["uniform_cells"] = std::move(uniform);
  if (opts.method == "kernel_density") {
    out.report["bandwidth_to"] = te.bandwidth_to;
    out.report["bandwidth_from"] = te.bandwidth_from;
  }
  out.kernel = std::move(te.kernel);
  return out;
}

void write_out(const Run& run, const char* name, const std::string& text) {
  ddc::io::write_text_file((run.out / name).string(), text);
}

void write_out(const Run& run, const char* name, const json& j) {
  ddc::io::write_json_file((run.out / name).string(), j);
}

int cmd_validate(const Run& run) {
  ModelBundle b = load_model(run, true);
  auto violations = ddc::validate(b.spec, b.grid, b.kernel);
  json report;
  report["subcommand"] = "validate";
  report.update(ddc::io::violations_json(violations));
  report["config"] = json{{"model", ddc::io::echo_model(b.spec)},
                          {"grid", ddc::io::echo_grid(b.grid)}};
  write_out(run, "validate.json", report);
  if (!violations.empty()) {
    std::fprintf(stderr, "validate: %zu violation(s), see validate.json\n",
                 violations.size());
    return 1;
  }
  std::fprintf(stderr, "validate: ok\n");
  return 0;
}

int cmd_solve(const Run& run) {
  ModelBundle b = load_model(run, true);
  ddc::PayoffParams params = ddc::io::parse_payoff(section(run, "payoff"), b.spec);
  if (params.beta.empty())
    throw ddc::ConfigError("config: \"payoff.beta\" is required for solve");
  params.check(b.spec);
  ddc::io::SolverOptions solver;
  if (run.config.contains("solver"))
    solver = ddc::io::parse_solver(run.config.at("solver"));
  ddc::SolvedModel sm =
      ddc::solve_model(b.spec, params, b.grid, b.kernel, solver.tol, solver.max_iter);
  json result;
  result["subcommand"] = "solve";
  result["iterations"] = sm.value.iterations;
  result["residual"] = sm.value.residual;
  result["converged"] = sm.value.converged;
  result["config"] = json{{"model", ddc::io::echo_model(b.spec)},
                          {"grid", ddc::io::echo_grid(b.grid)},
                          {"kernel", ddc::io::echo_kernel(b.kernel)},
                          {"payoff", ddc::io::echo_payoff(params)},
                          {"solver", ddc::io::echo_solver(solver)}};
  write_out(run, "result.json", result);
  write_out(run, "value.csv", ddc::io::value_csv(sm.value));
  write_out(run, "ccp.csv", ddc::io::ccp_csv(sm.ccps, b.spec.horizon.is_finite()));
  return 0;
}

int cmd_simulate(const Run& run) {
  ModelBundle b = load_model(run, true);
  ddc::PayoffParams payoff = ddc::io::parse_payoff(section(run, "payoff"), b.spec);
  if (!payoff.beta.empty())
    throw ddc::ConfigError(
        "config: \"payoff.beta\" is not used by simulate; put a point_mass "
        "component in \"mixture\" instead");
  ddc::MixtureSpec mix = ddc::io::parse_mixture(section(run, "mixture"));
  if (mix.dim() != b.spec.random_coef_count)
    throw ddc::ConfigError("config: \"mixture\" draws " + std::to_string(mix.dim()) +
                           " coordinates but \"model.random_coef_count\" is " +
                           std::to_string(b.spec.random_coef_count));
  ddc::io::PanelOptions po = ddc::io::parse_panel_options(section(run, "panel"));
  if (!po.init_dist.empty() &&
      static_cast<int>(po.init_dist.size()) != b.grid.size())
    throw ddc::ConfigError(
        "config: \"panel.init_dist\" must have one entry per grid state");
  auto betas = ddc::draw_types(mix, po.n, run.seed);
  ddc::Panel panel =
      ddc::simulate_panel(b.spec, b.grid, b.kernel, payoff.gamma, betas, po.periods,
                          po.init_dist, run.seed);

  std::string types = "id";
  for (int d = 1; d <= mix.dim(); ++d) types += ",b" + std::to_string(d);
  types += '\n';
  for (int i = 0; i < po.n; ++i) {
    types += std::to_string(i);
    for (double v : betas[i]) {
      types += ',';
      types += ddc::io::format_double(v);
    }
    types += '\n';
  }

  json result;
  result["subcommand"] = "simulate";
  result["seed"] = run.seed;
  result["n"] = po.n;
  result["periods"] = po.periods;
  result["config"] = json{{"model", ddc::io::echo_model(b.spec)},
                          {"grid", ddc::io::echo_grid(b.grid)},
                          {"kernel", ddc::io::echo_kernel(b.kernel)},
                          {"payoff", ddc::io::echo_payoff(payoff)},
                          {"mixture", ddc::io::echo_mixture(mix)},
                          {"panel", ddc::io::echo_panel_options(po)}};
  write_out(run, "result.json", result);
  write_out(run, "panel.csv", ddc::io::panel_csv(panel, b.grid));
  write_out(run, "types.csv", types);
  return 0;
}

int cmd_estimate(const Run& run) {
  ModelBundle b = load_model(run, false);
  ddc::Panel panel = load_panel(run, b);
  StepOne s1 = step_one(run, b, panel);
  ddc::EstimatorConfig ec;
  if (run.config.contains("estimator"))
    ec = ddc::io::parse_estimator(run.config.at("estimator"));
  ddc::EstimateResult r = ddc::estimate(panel, b.grid, s1.kernel, b.spec, ec);

  json result;
  result["subcommand"] = "estimate";
  result["n"] = panel.n;
  result["periods"] = panel.periods;
  result.update(ddc::io::estimate_json(r));
  result["transition"] = s1.report;
  result["config"] = json{{"model", ddc::io::echo_model(b.spec)},
                          {"grid", ddc::io::echo_grid(b.grid)},
                          {"estimator", ddc::io::echo_estimator(ec)}};
  write_out(run, "result.json", result);
  write_out(run, "cdf.csv", ddc::io::cdf_csv(ddc::estimated_cdf(r.sieve, 0, 0)));
  write_out(run, "kernel.csv", ddc::io::kernel_csv(s1.kernel));
  std::fprintf(stderr, "estimate: gamma[0] = %g, %d active type(s), %.3f s\n",
               r.gamma.empty() ? 0.0 : r.gamma[0], r.active_types, r.seconds);
  return 0;
}

int cmd_montecarlo(const Run& run) {
  ddc::io::McOptions opts;
  if (run.config.contains("montecarlo"))
    opts = ddc::io::parse_mc_options(run.config.at("montecarlo"));
  ddc::McDesign design;
  if (opts.design == "baseline") {
    design = ddc::McDesign::baseline();
  } else {
    ModelBundle b = load_model(run, true);
    ddc::PayoffParams payoff = ddc::io::parse_payoff(section(run, "payoff"), b.spec);
    if (!payoff.beta.empty())
      throw ddc::ConfigError(
          "config: \"payoff.beta\" is not used by montecarlo; the mixture draws it");
    ddc::MixtureSpec mix = ddc::io::parse_mixture(section(run, "mixture"));
    if (mix.dim() != b.spec.random_coef_count)
      throw ddc::ConfigError("config: \"mixture\" draws " + std::to_string(mix.dim()) +
                             " coordinates but \"model.random_coef_count\" is " +
                             std::to_string(b.spec.random_coef_count));
    if (!opts.init_dist.empty() &&
        static_cast<int>(opts.init_dist.size()) != b.grid.size())
      throw ddc::ConfigError(
          "config: \"montecarlo.init_dist\" must have one entry per grid state");
    design.spec = std::move(b.spec);
    design.grid = std::move(b.grid);
    design.kernel = std::move(b.kernel);
    design.gamma = std::move(payoff.gamma);
    design.mixture = std::move(mix);
    design.periods = opts.periods;
    design.init_dist = opts.init_dist;
  }
  ddc::McConfig mc;
  mc.sample_sizes = opts.sample_sizes;
  mc.replications = opts.replications;
  mc.seed = run.seed;
  mc.use_true_kernel = opts.use_true_kernel;
  if (run.config.contains("estimator"))
    mc.estimator = ddc::io::parse_estimator(run.config.at("estimator"));
  ddc::McSummary summary = ddc::run_monte_carlo(design, mc);

  json result;
  result["subcommand"] = "montecarlo";
  result["seed"] = run.seed;
  result.update(ddc::io::mc_summary_json(summary));
  result["config"] =
      json{{"montecarlo", ddc::io::echo_mc_options(opts)},
           {"estimator", ddc::io::echo_estimator(mc.estimator)},
           {"design",
            json{{"model", ddc::io::echo_model(design.spec)},
                 {"grid", ddc::io::echo_grid(design.grid)},
                 {"kernel", ddc::io::echo_kernel(design.kernel)},
                 {"gamma", design.gamma},
                 {"mixture", ddc::io::echo_mixture(design.mixture)},
                 {"periods", design.periods},
                 {"init_dist", design.init_dist.empty() ? json("uniform")
                                                        : json(design.init_dist)}}}};
  write_out(run, "summary.json", result);
  write_out(run, "table.csv", ddc::io::mc_table_csv(summary));
  write_out(run, "timings.json", ddc::io::mc_timings_json(summary));
  for (const ddc::McCell& cell : summary.cells)
    std::fprintf(stderr, "montecarlo: n = %d, MISE = %g, %d failure(s)\n", cell.n,
                 cell.mise, cell.failures);
  return 0;
}

int cmd_rank(const Run& run) {
  ddc::io::RankOptions opts;
  if (run.config.contains("rank"))
    opts = ddc::io::parse_rank_options(run.config.at("rank"));
  ModelBundle b = load_model(run, opts.mode == "population");
  for (auto [value, name] : {std::pair{opts.cond.a1, "rank.a1"},
                             std::pair{opts.cond.a2, "rank.a2"},
                             std::pair{opts.cond.a3, "rank.a3"}})
    if (value < 0 || value >= b.spec.num_actions)
      throw ddc::ConfigError("config: \"" + std::string(name) + "\" out of range");
  if (opts.cond.x1 < 0 || opts.cond.x1 >= b.grid.size())
    throw ddc::ConfigError("config: \"rank.x1\" out of range");

  ddc::RatioMatrix ratio;
  json transition_report;
  if (opts.mode == "population") {
    ddc::PayoffParams payoff = ddc::io::parse_payoff(section(run, "payoff"), b.spec);
    ddc::DiscreteTypeSet types = ddc::io::parse_types(section(run, "types"));
    for (const auto& beta : types.betas)
      if (static_cast<int>(beta.size()) != b.spec.random_coef_count)
        throw ddc::ConfigError(
            "config: \"types.betas\" entries must have "
            "\"model.random_coef_count\" coordinates");
    Eigen::MatrixXd joint = ddc::population_joint(b.spec, b.grid, b.kernel,
                                                  payoff.gamma, types, opts.cond);
    ratio = ddc::build_ratio_matrix(joint, b.kernel, opts.cond, opts.floor);
  } else {
    ddc::Panel panel = load_panel(run, b);
    StepOne s1 = step_one(run, b, panel);
    transition_report = s1.report;
    Eigen::MatrixXi counts;
    Eigen::MatrixXd joint =
        ddc::empirical_joint(panel, b.grid.size(), opts.cond, counts);
    ratio = ddc::build_ratio_matrix(joint, s1.kernel, opts.cond, opts.floor, &counts,
                                    opts.min_count);
  }
  ddc::RankEstimate est =
      ddc::estimate_rank(ratio, opts.rel_threshold, opts.abs_threshold);

  json result;
  result["subcommand"] = "rank";
  result.update(ddc::io::rank_json(ratio, est));
  if (!transition_report.is_null()) result["transition"] = transition_report;
  result["config"] = json{{"rank", ddc::io::echo_rank_options(opts)},
                          {"model", ddc::io::echo_model(b.spec)},
                          {"grid", ddc::io::echo_grid(b.grid)}};
  write_out(run, "rank.json", result);
  std::fprintf(stderr, "rank: %d\n", est.rank);
  return 0;
}

int cmd_ident_check(const Run& run) {
  ddc::io::IdentOptions opts;
  if (run.config.contains("ident"))
    opts = ddc::io::parse_ident_options(run.config.at("ident"));
  ModelBundle b = load_model(run, true);
  for (auto [value, name] : {std::pair{opts.cond.a1, "ident.a1"},
                             std::pair{opts.cond.a4, "ident.a4"}})
    if (value < 0 || value >= b.spec.num_actions)
      throw ddc::ConfigError("config: \"" + std::string(name) + "\" out of range");
  for (auto [value, name] : {std::pair{opts.cond.x1, "ident.x1"},
                             std::pair{opts.cond.x4, "ident.x4"}})
    if (value < 0 || value >= b.grid.size())
      throw ddc::ConfigError("config: \"" + std::string(name) + "\" out of range");
  ddc::PayoffParams payoff = ddc::io::parse_payoff(section(run, "payoff"), b.spec);
  ddc::DiscreteTypeSet types = ddc::io::parse_types(section(run, "types"));
  for (const auto& beta : types.betas)
    if (static_cast<int>(beta.size()) != b.spec.random_coef_count)
      throw ddc::ConfigError(
          "config: \"types.betas\" entries must have "
          "\"model.random_coef_count\" coordinates");

  ddc::OperatorBundle bundle =
      ddc::build_operators(b.spec, b.grid, b.kernel, payoff.gamma, types, opts.cond,
                           opts.residual_tol);
  ddc::InjectivityDiagnostic diag = ddc::injectivity_diagnostic(bundle);

  json result;
  result["subcommand"] = "ident-check";
  int code = 0;
  try {
    ddc::SpectralRecovery rec =
        ddc::spectral_recover(bundle, opts.gap_tol, opts.pinv_rel_cutoff);
    result.update(ddc::io::ident_json(bundle, diag, &rec, ""));
  } catch (const ddc::NumericError& e) {
    result.update(ddc::io::ident_json(bundle, diag, nullptr, e.what()));
    code = 2;
  }
  result["config"] = json{{"ident", ddc::io::echo_ident_options(opts)},
                          {"model", ddc::io::echo_model(b.spec)},
                          {"grid", ddc::io::echo_grid(b.grid)},
                          {"payoff", ddc::io::echo_payoff(payoff)},
                          {"types", ddc::io::echo_types(types)}};
  write_out(run, "ident.json", result);
  if (code != 0)
    std::fprintf(stderr, "ident-check: recovery failed, see ident.json\n");
  return code;
}

int g_exit = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Dynamic discrete choice toolkit: solve and simulate models with "
      "permanent unobserved types, estimate the type distribution, count "
      "types, and check the spectral identification argument numerically."};
  app.require_subcommand(1);

  Args args;
  auto add = [&](const char* name, const char* desc, int (*fn)(const Run&)) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--config", args.config_path, "JSON config document")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "Override the config's seed");
    cmd->add_option("--out", args.out_dir, "Output directory, created if missing");
    cmd->add_option("--threads", args.threads, "Worker threads (0 = hardware)");
    cmd->callback([&args, fn]() { g_exit = fn(prepare(args)); });
  };
  add("validate", "Check a model config for structural violations", cmd_validate);
  add("solve", "Solve one type's value function and choice probabilities",
      cmd_solve);
  add("simulate", "Draw types and simulate a panel", cmd_simulate);
  add("estimate", "Two-step estimation of the type distribution from a panel",
      cmd_estimate);
  add("montecarlo", "Replicated simulate-estimate study", cmd_montecarlo);
  add("rank", "Estimate the number of types from a ratio-matrix rank", cmd_rank);
  add("ident-check", "Numerical check of the operator factorization and "
                     "eigendecomposition recovery", cmd_ident_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ddc::ConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ddc::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ddc::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return g_exit;
}
