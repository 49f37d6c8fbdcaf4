#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddc/ident.hpp"
#include "ddc/mixture.hpp"
#include "ddc/model.hpp"
#include "ddc/montecarlo.hpp"
#include "ddc/rank.hpp"
#include "ddc/simulate.hpp"
#include "ddc/solver.hpp"
#include "ddc/transition.hpp"

// Config schema, result serialization, and CSV formats (documented in
// docs/formats.md). Doubles are written as shortest round-trip decimal text
// and JSON keys keep insertion order, so a rerun with the same seed emits
// byte-identical files. Wall-clock figures never enter primary outputs; they
// go to timings.json / stderr only.

namespace ddc::io {

using json = nlohmann::ordered_json;

// Shortest decimal string that parses back to exactly x.
std::string format_double(double x);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

// Schema helpers. `where` is the dotted path used in messages; every key of
// j must appear in `allowed` or the whole config is rejected.
void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed);
const json& require(const json& j, const std::string& where, const char* key);
bool get_bool(const json& j, const std::string& where, const char* key,
              bool fallback);
std::int64_t get_int(const json& j, const std::string& where, const char* key,
                     std::int64_t fallback);
double get_double(const json& j, const std::string& where, const char* key,
                  double fallback);
std::string get_string(const json& j, const std::string& where, const char* key,
                       const std::string& fallback);
std::vector<double> get_double_vec(const json& j, const std::string& where,
                                   const char* key,
                                   std::vector<double> fallback = {});
std::vector<int> get_int_vec(const json& j, const std::string& where,
                             const char* key, std::vector<int> fallback = {});

// Section parsers; each rejects unknown keys by full path and validates the
// result. echo_* emit the fully resolved section (defaults filled in) for the
// metadata block of result files.
ModelSpec parse_model(const json& j, const std::string& where = "model");
json echo_model(const ModelSpec& spec);

StateGrid parse_grid(const json& j, const std::string& where = "grid");
json echo_grid(const StateGrid& grid);

// kind: "ar1" | "uniform" | "csv" | "inline"; csv paths resolve against
// base_dir (the config file's directory).
TransitionKernel parse_kernel(const json& j, const StateGrid& grid,
                              int num_actions, const std::string& base_dir,
                              const std::string& where = "kernel");
json echo_kernel(const TransitionKernel& kernel);

PayoffParams parse_payoff(const json& j, const ModelSpec& spec,
                          const std::string& where = "payoff");
json echo_payoff(const PayoffParams& params);

MixtureSpec parse_mixture(const json& j, const std::string& where = "mixture");
json echo_mixture(const MixtureSpec& mix);

DiscreteTypeSet parse_types(const json& j, const std::string& where = "types");
json echo_types(const DiscreteTypeSet& types);

EstimatorConfig parse_estimator(const json& j,
                                const std::string& where = "estimator");
json echo_estimator(const EstimatorConfig& config);

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};
SolverOptions parse_solver(const json& j, const std::string& where = "solver");
json echo_solver(const SolverOptions& options);

struct PanelOptions {
  int n = 0;
  int periods = 0;
  std::vector<double> init_dist;  // empty = uniform
};
PanelOptions parse_panel_options(const json& j, const std::string& where = "panel");
json echo_panel_options(const PanelOptions& options);

// method: "frequency" | "kernel_density" | "none" ("none" = use the config's
// kernel section as-is, skipping step 1).
struct TransitionOptions {
  std::string method = "frequency";
  std::vector<double> bandwidth_to, bandwidth_from;
};
TransitionOptions parse_transition_options(const json& j,
                                           const std::string& where = "transition");
json echo_transition_options(const TransitionOptions& options);

struct RankOptions {
  RankConditioning cond;
  std::string mode = "population";  // or "sample"
  double rel_threshold = 1e-6;
  double abs_threshold = 0.0;
  double floor = 1e-8;
  int min_count = 5;
};
RankOptions parse_rank_options(const json& j, const std::string& where = "rank");
json echo_rank_options(const RankOptions& options);

struct IdentOptions {
  IdentConditioning cond;
  double gap_tol = 1e-8;
  double pinv_rel_cutoff = 1e-12;
  double residual_tol = 1e-10;
};
IdentOptions parse_ident_options(const json& j, const std::string& where = "ident");
json echo_ident_options(const IdentOptions& options);

struct McOptions {
  std::string design = "baseline";  // or "custom" (built from config sections)
  std::vector<int> sample_sizes{100, 500, 1000};
  int replications = 100;
  bool use_true_kernel = false;
  int periods = 8;                // custom designs only
  std::vector<double> init_dist;  // custom designs only; empty = uniform
};
McOptions parse_mc_options(const json& j, const std::string& where = "montecarlo");
json echo_mc_options(const McOptions& options);

// CSV serializers. Headers are fixed; every row ends with '\n'.
std::string panel_csv(const Panel& panel, const StateGrid& grid);  // id,t,x1..xk,a
Panel parse_panel_csv(const std::string& text, const StateGrid& grid);

std::string kernel_csv(const TransitionKernel& kernel);  // a,from,to,prob
TransitionKernel parse_kernel_csv(const std::string& text);

// period,state,value; period 0 = stationary, 1..T1 for finite horizon.
std::string value_csv(const ValueFunction& vf);
// period,state,action,prob; period as above.
std::string ccp_csv(const std::vector<CcpTable>& tables, bool finite);
std::string cdf_csv(const StepCdf& cdf);  // b,cdf

// Result documents (no wall-clock fields).
json estimate_json(const EstimateResult& result);
json mc_summary_json(const McSummary& summary);
std::string mc_table_csv(const McSummary& summary);  // rows metric, columns n
json mc_timings_json(const McSummary& summary);      // the non-deterministic part
json rank_json(const RatioMatrix& matrix, const RankEstimate& estimate);
json ident_json(const OperatorBundle& bundle, const InjectivityDiagnostic& diag,
                const SpectralRecovery* recovery, const std::string& recovery_error);
json violations_json(const std::vector<Violation>& violations);

}  // namespace ddc::io
