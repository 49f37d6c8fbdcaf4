#include "ddc/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>

#include "ddc/error.hpp"

namespace ddc::io {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

std::string q(const std::string& s) { return "\"" + s + "\""; }

double req_double(const json& j, const std::string& where, const char* key) {
  const json& v = require(j, where, key);
  if (!v.is_number()) fail(q(where + "." + key) + " must be a number");
  return v.get<double>();
}

std::int64_t req_int(const json& j, const std::string& where, const char* key) {
  const json& v = require(j, where, key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    fail(q(where + "." + key) + " must be an integer");
  return v.get<std::int64_t>();
}

std::string req_string(const json& j, const std::string& where, const char* key) {
  const json& v = require(j, where, key);
  if (!v.is_string()) fail(q(where + "." + key) + " must be a string");
  return v.get<std::string>();
}

std::vector<double> as_double_vec(const json& v, const std::string& full) {
  if (!v.is_array()) fail(q(full) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) fail(q(full) + " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::vector<double>> as_double_mat(const json& v, const std::string& full) {
  if (!v.is_array()) fail(q(full) + " must be an array of number arrays");
  std::vector<std::vector<double>> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_double_vec(v[i], full + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::string_view> split_lines(const std::string& text) {
  std::vector<std::string_view> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    std::size_t pos = rest.find('\n');
    std::string_view line = pos == std::string_view::npos ? rest : rest.substr(0, pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    std::size_t pos = line.find(',');
    if (pos == std::string_view::npos) {
      out.push_back(line);
      return out;
    }
    out.push_back(line.substr(0, pos));
    line.remove_prefix(pos + 1);
  }
}

[[noreturn]] void csv_fail(const char* what, std::size_t line_no, const std::string& msg) {
  throw ConfigError(std::string(what) + " csv, line " + std::to_string(line_no + 1) +
                    ": " + msg);
}

double field_double(std::string_view s, const char* what, std::size_t line_no) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size())
    csv_fail(what, line_no, "bad number " + q(std::string(s)));
  return x;
}

long field_long(std::string_view s, const char* what, std::size_t line_no) {
  long x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size())
    csv_fail(what, line_no, "bad integer " + q(std::string(s)));
  return x;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + q(path));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw ConfigError("cannot read " + q(path));
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + q(path) + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw ConfigError("cannot write " + q(path));
}

json load_json_file(const std::string& path) {
  std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(q(path) + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(q(where) + " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) fail("unknown key " + q(where + "." + item.key()));
  }
}

const json& require(const json& j, const std::string& where, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail("missing key " + q(where + "." + key));
  return j.at(key);
}

bool get_bool(const json& j, const std::string& where, const char* key,
              bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) fail(q(where + "." + key) + " must be a boolean");
  return v.get<bool>();
}

std::int64_t get_int(const json& j, const std::string& where, const char* key,
                     std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  return req_int(j, where, key);
}

double get_double(const json& j, const std::string& where, const char* key,
                  double fallback) {
  if (!j.contains(key)) return fallback;
  return req_double(j, where, key);
}

std::string get_string(const json& j, const std::string& where, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  return req_string(j, where, key);
}

std::vector<double> get_double_vec(const json& j, const std::string& where,
                                   const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  return as_double_vec(j.at(key), where + "." + std::string(key));
}

std::vector<int> get_int_vec(const json& j, const std::string& where,
                             const char* key, std::vector<int> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  std::string full = where + "." + key;
  if (!v.is_array()) fail(q(full) + " must be an array of integers");
  std::vector<int> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number_integer() && !e.is_number_unsigned())
      fail(q(full) + " must be an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

ModelSpec parse_model(const json& j, const std::string& where) {
  check_keys(j, where,
             {"num_actions", "state_dim", "discount", "random_coef_count",
              "intercept_mode", "horizon"});
  ModelSpec spec;
  spec.num_actions = static_cast<int>(get_int(j, where, "num_actions", spec.num_actions));
  spec.state_dim = static_cast<int>(get_int(j, where, "state_dim", spec.state_dim));
  spec.discount = get_double(j, where, "discount", spec.discount);
  spec.random_coef_count =
      static_cast<int>(get_int(j, where, "random_coef_count", spec.random_coef_count));
  spec.intercept_mode = get_bool(j, where, "intercept_mode", spec.intercept_mode);
  if (j.contains("horizon")) {
    const json& h = j.at("horizon");
    if (h.is_string() && h.get<std::string>() == "infinite") {
      spec.horizon = Horizon::infinite();
    } else if (h.is_object()) {
      check_keys(h, where + ".horizon", {"finite"});
      int t1 = static_cast<int>(req_int(h, where + ".horizon", "finite"));
      if (t1 < 1) fail(q(where + ".horizon.finite") + " must be >= 1");
      spec.horizon = Horizon::finite(t1);
    } else {
      fail(q(where + ".horizon") + " must be \"infinite\" or {\"finite\": T}");
    }
  }
  spec.check();
  return spec;
}

json echo_model(const ModelSpec& spec) {
  json j;
  j["num_actions"] = spec.num_actions;
  j["state_dim"] = spec.state_dim;
  j["discount"] = spec.discount;
  j["random_coef_count"] = spec.random_coef_count;
  j["intercept_mode"] = spec.intercept_mode;
  if (spec.horizon.is_finite())
    j["horizon"] = json{{"finite", spec.horizon.periods}};
  else
    j["horizon"] = "infinite";
  return j;
}

StateGrid parse_grid(const json& j, const std::string& where) {
  check_keys(j, where, {"axes", "points"});
  if (j.contains("axes") == j.contains("points"))
    fail(q(where) + " needs exactly one of \"axes\", \"points\"");
  if (j.contains("axes")) {
    auto axes = as_double_mat(j.at("axes"), where + ".axes");
    if (axes.empty()) fail(q(where + ".axes") + " must be non-empty");
    for (std::size_t d = 0; d < axes.size(); ++d)
      if (axes[d].empty())
        fail(q(where + ".axes[" + std::to_string(d) + "]") + " must be non-empty");
    return StateGrid::product(axes);
  }
  auto points = as_double_mat(j.at("points"), where + ".points");
  if (points.empty()) fail(q(where + ".points") + " must be non-empty");
  std::size_t dim = points.front().size();
  if (dim == 0) fail(q(where + ".points") + " entries must be non-empty");
  std::vector<double> coords;
  coords.reserve(points.size() * dim);
  for (std::size_t s = 0; s < points.size(); ++s) {
    if (points[s].size() != dim)
      fail(q(where + ".points[" + std::to_string(s) + "]") +
           " has inconsistent dimension");
    coords.insert(coords.end(), points[s].begin(), points[s].end());
  }
  return StateGrid::from_points(static_cast<int>(dim), std::move(coords));
}

json echo_grid(const StateGrid& grid) {
  json points = json::array();
  for (int s = 0; s < grid.size(); ++s) {
    auto x = grid.point(s);
    points.push_back(std::vector<double>(x.begin(), x.end()));
  }
  return json{{"points", std::move(points)}};
}

TransitionKernel parse_kernel(const json& j, const StateGrid& grid, int num_actions,
                              const std::string& base_dir, const std::string& where) {
  std::string kind = req_string(j, where, "kind");
  const int S = grid.size();
  if (kind == "ar1") {
    check_keys(j, where, {"kind", "persistence", "noise_sd", "drift"});
    double persistence = req_double(j, where, "persistence");
    auto noise_sd = as_double_vec(require(j, where, "noise_sd"), where + ".noise_sd");
    if (static_cast<int>(noise_sd.size()) != grid.dim)
      fail(q(where + ".noise_sd") + " must have one entry per state dimension");
    auto drift = as_double_mat(require(j, where, "drift"), where + ".drift");
    if (static_cast<int>(drift.size()) != num_actions)
      fail(q(where + ".drift") + " must have one row per action");
    for (const auto& row : drift)
      if (static_cast<int>(row.size()) != grid.dim)
        fail(q(where + ".drift") + " rows must have one entry per state dimension");
    return ar1_kernel(grid, num_actions, persistence, noise_sd, drift);
  }
  if (kind == "uniform") {
    check_keys(j, where, {"kind"});
    return TransitionKernel::uniform(num_actions, S);
  }
  if (kind == "csv") {
    check_keys(j, where, {"kind", "path"});
    std::filesystem::path p(req_string(j, where, "path"));
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    TransitionKernel kernel = parse_kernel_csv(read_text_file(p.string()));
    if (kernel.num_states != S || kernel.num_actions != num_actions)
      fail(q(where + ".path") + " holds a " + std::to_string(kernel.num_actions) +
           " action, " + std::to_string(kernel.num_states) +
           " state kernel; the model needs " + std::to_string(num_actions) + " x " +
           std::to_string(S));
    return kernel;
  }
  if (kind == "inline") {
    check_keys(j, where, {"kind", "probs"});
    const json& probs = require(j, where, "probs");
    if (!probs.is_array() || static_cast<int>(probs.size()) != num_actions)
      fail(q(where + ".probs") + " must be [action][from][to] with one slice per action");
    TransitionKernel kernel = TransitionKernel::zeros(num_actions, S);
    for (int a = 0; a < num_actions; ++a) {
      auto slice = as_double_mat(probs[a], where + ".probs[" + std::to_string(a) + "]");
      if (static_cast<int>(slice.size()) != S)
        fail(q(where + ".probs") + " slices must be " + std::to_string(S) + " x " +
             std::to_string(S));
      for (int from = 0; from < S; ++from) {
        if (static_cast<int>(slice[from].size()) != S)
          fail(q(where + ".probs") + " slices must be " + std::to_string(S) + " x " +
               std::to_string(S));
        for (int to = 0; to < S; ++to) kernel.at(a, from, to) = slice[from][to];
      }
    }
    return kernel;
  }
  fail(q(where + ".kind") + " must be one of \"ar1\", \"uniform\", \"csv\", \"inline\"");
}

json echo_kernel(const TransitionKernel& kernel) {
  json slices = json::array();
  for (int a = 0; a < kernel.num_actions; ++a) {
    json rows = json::array();
    for (int from = 0; from < kernel.num_states; ++from) {
      const double* r = kernel.row(a, from);
      rows.push_back(std::vector<double>(r, r + kernel.num_states));
    }
    slices.push_back(std::move(rows));
  }
  return json{{"kind", "inline"}, {"probs", std::move(slices)}};
}

PayoffParams parse_payoff(const json& j, const ModelSpec& spec,
                          const std::string& where) {
  check_keys(j, where, {"gamma", "beta"});
  PayoffParams params;
  params.gamma = as_double_vec(require(j, where, "gamma"), where + ".gamma");
  if (static_cast<int>(params.gamma.size()) != spec.gamma_size())
    fail(q(where + ".gamma") + " must have " + std::to_string(spec.gamma_size()) +
         " entries for this model");
  params.beta = get_double_vec(j, where, "beta");
  if (!params.beta.empty() &&
      static_cast<int>(params.beta.size()) != spec.random_coef_count)
    fail(q(where + ".beta") + " must have " + std::to_string(spec.random_coef_count) +
         " entries for this model");
  return params;
}

json echo_payoff(const PayoffParams& params) {
  json j;
  j["gamma"] = params.gamma;
  if (!params.beta.empty()) j["beta"] = params.beta;
  return j;
}

MixtureSpec parse_mixture(const json& j, const std::string& where) {
  check_keys(j, where, {"components"});
  const json& comps = require(j, where, "components");
  if (!comps.is_array() || comps.empty())
    fail(q(where + ".components") + " must be a non-empty array");
  MixtureSpec mix;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    std::string cw = where + ".components[" + std::to_string(i) + "]";
    const json& c = comps[i];
    check_keys(c, cw, {"weight", "truncated_normal", "point_mass"});
    MixtureComponent comp;
    comp.weight = req_double(c, cw, "weight");
    if (c.contains("truncated_normal") == c.contains("point_mass"))
      fail(q(cw) + " needs exactly one of \"truncated_normal\", \"point_mass\"");
    if (c.contains("truncated_normal")) {
      const json& t = c.at("truncated_normal");
      std::string tw = cw + ".truncated_normal";
      check_keys(t, tw, {"mean", "sd", "lo", "hi"});
      TruncatedNormal tn;
      tn.mean = as_double_vec(require(t, tw, "mean"), tw + ".mean");
      tn.sd = as_double_vec(require(t, tw, "sd"), tw + ".sd");
      tn.lo = req_double(t, tw, "lo");
      tn.hi = req_double(t, tw, "hi");
      comp.family = std::move(tn);
    } else {
      const json& p = c.at("point_mass");
      std::string pw = cw + ".point_mass";
      check_keys(p, pw, {"value"});
      PointMass pm;
      pm.value = as_double_vec(require(p, pw, "value"), pw + ".value");
      comp.family = std::move(pm);
    }
    mix.components.push_back(std::move(comp));
  }
  mix.check();
  return mix;
}

json echo_mixture(const MixtureSpec& mix) {
  json comps = json::array();
  for (const auto& comp : mix.components) {
    json c;
    c["weight"] = comp.weight;
    if (const auto* tn = std::get_if<TruncatedNormal>(&comp.family)) {
      c["truncated_normal"] =
          json{{"mean", tn->mean}, {"sd", tn->sd}, {"lo", tn->lo}, {"hi", tn->hi}};
    } else {
      const auto& pm = std::get<PointMass>(comp.family);
      c["point_mass"] = json{{"value", pm.value}};
    }
    comps.push_back(std::move(c));
  }
  return json{{"components", std::move(comps)}};
}

DiscreteTypeSet parse_types(const json& j, const std::string& where) {
  check_keys(j, where, {"betas", "weights"});
  DiscreteTypeSet types;
  types.betas = as_double_mat(require(j, where, "betas"), where + ".betas");
  types.weights = as_double_vec(require(j, where, "weights"), where + ".weights");
  if (types.betas.size() != types.weights.size())
    fail(q(where) + ": betas and weights must have the same length");
  types.check();
  return types;
}

json echo_types(const DiscreteTypeSet& types) {
  return json{{"betas", types.betas}, {"weights", types.weights}};
}

EstimatorConfig parse_estimator(const json& j, const std::string& where) {
  check_keys(j, where,
             {"beta_lo", "beta_hi", "grid_points", "explicit_points", "cells",
              "cell_of_state", "gamma_lo", "gamma_hi", "gamma_tol",
              "max_profile_evals", "em_tol", "em_max_iter", "solver_tol",
              "solver_max_iter", "active_threshold"});
  EstimatorConfig c;
  c.beta_lo = get_double(j, where, "beta_lo", c.beta_lo);
  c.beta_hi = get_double(j, where, "beta_hi", c.beta_hi);
  c.grid_points = static_cast<int>(get_int(j, where, "grid_points", c.grid_points));
  if (j.contains("explicit_points"))
    c.explicit_points =
        as_double_mat(j.at("explicit_points"), where + ".explicit_points");
  c.cells = static_cast<int>(get_int(j, where, "cells", c.cells));
  c.cell_of_state = get_int_vec(j, where, "cell_of_state", c.cell_of_state);
  c.gamma_lo = get_double_vec(j, where, "gamma_lo", c.gamma_lo);
  c.gamma_hi = get_double_vec(j, where, "gamma_hi", c.gamma_hi);
  c.gamma_tol = get_double(j, where, "gamma_tol", c.gamma_tol);
  c.max_profile_evals =
      static_cast<int>(get_int(j, where, "max_profile_evals", c.max_profile_evals));
  c.em_tol = get_double(j, where, "em_tol", c.em_tol);
  c.em_max_iter = static_cast<int>(get_int(j, where, "em_max_iter", c.em_max_iter));
  c.solver_tol = get_double(j, where, "solver_tol", c.solver_tol);
  c.solver_max_iter =
      static_cast<int>(get_int(j, where, "solver_max_iter", c.solver_max_iter));
  c.active_threshold = get_double(j, where, "active_threshold", c.active_threshold);
  return c;
}

json echo_estimator(const EstimatorConfig& c) {
  json j;
  j["beta_lo"] = c.beta_lo;
  j["beta_hi"] = c.beta_hi;
  j["grid_points"] = c.grid_points;
  j["explicit_points"] = c.explicit_points;
  j["cells"] = c.cells;
  j["cell_of_state"] = c.cell_of_state;
  j["gamma_lo"] = c.gamma_lo;
  j["gamma_hi"] = c.gamma_hi;
  j["gamma_tol"] = c.gamma_tol;
  j["max_profile_evals"] = c.max_profile_evals;
  j["em_tol"] = c.em_tol;
  j["em_max_iter"] = c.em_max_iter;
  j["solver_tol"] = c.solver_tol;
  j["solver_max_iter"] = c.solver_max_iter;
  j["active_threshold"] = c.active_threshold;
  return j;
}

SolverOptions parse_solver(const json& j, const std::string& where) {
  check_keys(j, where, {"tol", "max_iter"});
  SolverOptions o;
  o.tol = get_double(j, where, "tol", o.tol);
  o.max_iter = static_cast<int>(get_int(j, where, "max_iter", o.max_iter));
  if (o.tol <= 0) fail(q(where + ".tol") + " must be positive");
  if (o.max_iter < 1) fail(q(where + ".max_iter") + " must be >= 1");
  return o;
}

json echo_solver(const SolverOptions& o) {
  return json{{"tol", o.tol}, {"max_iter", o.max_iter}};
}

PanelOptions parse_panel_options(const json& j, const std::string& where) {
  check_keys(j, where, {"n", "periods", "init_dist"});
  PanelOptions o;
  o.n = static_cast<int>(req_int(j, where, "n"));
  o.periods = static_cast<int>(req_int(j, where, "periods"));
  if (o.n < 1) fail(q(where + ".n") + " must be >= 1");
  if (o.periods < 1) fail(q(where + ".periods") + " must be >= 1");
  o.init_dist = get_double_vec(j, where, "init_dist");
  return o;
}

json echo_panel_options(const PanelOptions& o) {
  json j;
  j["n"] = o.n;
  j["periods"] = o.periods;
  j["init_dist"] = o.init_dist.empty() ? json("uniform") : json(o.init_dist);
  return j;
}

TransitionOptions parse_transition_options(const json& j, const std::string& where) {
  check_keys(j, where, {"method", "bandwidth_to", "bandwidth_from"});
  TransitionOptions o;
  o.method = get_string(j, where, "method", o.method);
  if (o.method != "frequency" && o.method != "kernel_density" && o.method != "none")
    fail(q(where + ".method") +
         " must be one of \"frequency\", \"kernel_density\", \"none\"");
  o.bandwidth_to = get_double_vec(j, where, "bandwidth_to");
  o.bandwidth_from = get_double_vec(j, where, "bandwidth_from");
  return o;
}

json echo_transition_options(const TransitionOptions& o) {
  json j;
  j["method"] = o.method;
  if (o.method == "kernel_density") {
    j["bandwidth_to"] = o.bandwidth_to.empty() ? json("silverman") : json(o.bandwidth_to);
    j["bandwidth_from"] =
        o.bandwidth_from.empty() ? json("silverman") : json(o.bandwidth_from);
  }
  return j;
}

RankOptions parse_rank_options(const json& j, const std::string& where) {
  check_keys(j, where,
             {"a1", "a2", "a3", "x1", "mode", "rel_threshold", "abs_threshold",
              "floor", "min_count"});
  RankOptions o;
  o.cond.a1 = static_cast<int>(get_int(j, where, "a1", o.cond.a1));
  o.cond.a2 = static_cast<int>(get_int(j, where, "a2", o.cond.a2));
  o.cond.a3 = static_cast<int>(get_int(j, where, "a3", o.cond.a3));
  o.cond.x1 = static_cast<int>(get_int(j, where, "x1", o.cond.x1));
  o.mode = get_string(j, where, "mode", o.mode);
  if (o.mode != "population" && o.mode != "sample")
    fail(q(where + ".mode") + " must be \"population\" or \"sample\"");
  o.rel_threshold = get_double(j, where, "rel_threshold", o.rel_threshold);
  o.abs_threshold = get_double(j, where, "abs_threshold", o.abs_threshold);
  o.floor = get_double(j, where, "floor", o.floor);
  o.min_count = static_cast<int>(get_int(j, where, "min_count", o.min_count));
  return o;
}

json echo_rank_options(const RankOptions& o) {
  json j;
  j["a1"] = o.cond.a1;
  j["a2"] = o.cond.a2;
  j["a3"] = o.cond.a3;
  j["x1"] = o.cond.x1;
  j["mode"] = o.mode;
  j["rel_threshold"] = o.rel_threshold;
  j["abs_threshold"] = o.abs_threshold;
  j["floor"] = o.floor;
  j["min_count"] = o.min_count;
  return j;
}

IdentOptions parse_ident_options(const json& j, const std::string& where) {
  check_keys(j, where,
             {"a1", "a4", "x1", "x4", "gap_tol", "pinv_rel_cutoff", "residual_tol"});
  IdentOptions o;
  o.cond.a1 = static_cast<int>(get_int(j, where, "a1", o.cond.a1));
  o.cond.a4 = static_cast<int>(get_int(j, where, "a4", o.cond.a4));
  o.cond.x1 = static_cast<int>(get_int(j, where, "x1", o.cond.x1));
  o.cond.x4 = static_cast<int>(get_int(j, where, "x4", o.cond.x4));
  o.gap_tol = get_double(j, where, "gap_tol", o.gap_tol);
  o.pinv_rel_cutoff = get_double(j, where, "pinv_rel_cutoff", o.pinv_rel_cutoff);
  o.residual_tol = get_double(j, where, "residual_tol", o.residual_tol);
  return o;
}

json echo_ident_options(const IdentOptions& o) {
  json j;
  j["a1"] = o.cond.a1;
  j["a4"] = o.cond.a4;
  j["x1"] = o.cond.x1;
  j["x4"] = o.cond.x4;
  j["gap_tol"] = o.gap_tol;
  j["pinv_rel_cutoff"] = o.pinv_rel_cutoff;
  j["residual_tol"] = o.residual_tol;
  return j;
}

McOptions parse_mc_options(const json& j, const std::string& where) {
  check_keys(j, where,
             {"design", "sample_sizes", "replications", "use_true_kernel", "periods",
              "init_dist"});
  McOptions o;
  o.design = get_string(j, where, "design", o.design);
  if (o.design != "baseline" && o.design != "custom")
    fail(q(where + ".design") + " must be \"baseline\" or \"custom\"");
  if (o.design == "baseline" && (j.contains("periods") || j.contains("init_dist")))
    fail(q(where) + ": \"periods\" and \"init_dist\" are only valid with design "
                    "\"custom\"");
  o.sample_sizes = get_int_vec(j, where, "sample_sizes", o.sample_sizes);
  o.replications = static_cast<int>(get_int(j, where, "replications", o.replications));
  o.use_true_kernel = get_bool(j, where, "use_true_kernel", o.use_true_kernel);
  o.periods = static_cast<int>(get_int(j, where, "periods", o.periods));
  if (o.periods < 1) fail(q(where + ".periods") + " must be >= 1");
  o.init_dist = get_double_vec(j, where, "init_dist");
  return o;
}

json echo_mc_options(const McOptions& o) {
  json j;
  j["design"] = o.design;
  j["sample_sizes"] = o.sample_sizes;
  j["replications"] = o.replications;
  j["use_true_kernel"] = o.use_true_kernel;
  if (o.design == "custom") {
    j["periods"] = o.periods;
    j["init_dist"] = o.init_dist.empty() ? json("uniform") : json(o.init_dist);
  }
  return j;
}

std::string panel_csv(const Panel& panel, const StateGrid& grid) {
  std::string out = "id,t";
  for (int d = 1; d <= grid.dim; ++d) out += ",x" + std::to_string(d);
  out += ",a\n";
  for (int i = 0; i < panel.n; ++i) {
    for (int t = 0; t < panel.periods; ++t) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(t);
      auto x = grid.point(panel.state_at(i, t));
      for (double c : x) {
        out += ',';
        out += format_double(c);
      }
      out += ',';
      out += std::to_string(panel.action_at(i, t));
      out += '\n';
    }
  }
  return out;
}

Panel parse_panel_csv(const std::string& text, const StateGrid& grid) {
  auto lines = split_lines(text);
  if (lines.empty()) throw ConfigError("panel csv: empty file");
  std::string header = "id,t";
  for (int d = 1; d <= grid.dim; ++d) header += ",x" + std::to_string(d);
  header += ",a";
  if (lines.front() != header)
    csv_fail("panel", 0, "header must be " + q(header));

  struct Row {
    long id, t, state, action;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  long max_id = -1, max_t = -1;
  std::vector<double> x(grid.dim);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    auto f = split_fields(lines[k]);
    if (static_cast<int>(f.size()) != grid.dim + 3)
      csv_fail("panel", k, "expected " + std::to_string(grid.dim + 3) + " fields");
    Row r;
    r.id = field_long(f[0], "panel", k);
    r.t = field_long(f[1], "panel", k);
    if (r.id < 0 || r.t < 0) csv_fail("panel", k, "id and t must be >= 0");
    for (int d = 0; d < grid.dim; ++d) x[d] = field_double(f[d + 2], "panel", k);
    r.state = grid.nearest(x);
    r.action = field_long(f[grid.dim + 2], "panel", k);
    rows.push_back(r);
    max_id = std::max(max_id, r.id);
    max_t = std::max(max_t, r.t);
  }
  if (rows.empty()) throw ConfigError("panel csv: no data rows");
  Panel panel;
  panel.n = static_cast<int>(max_id + 1);
  panel.periods = static_cast<int>(max_t + 1);
  std::size_t cells = static_cast<std::size_t>(panel.n) * panel.periods;
  if (rows.size() != cells)
    throw ConfigError("panel csv: " + std::to_string(rows.size()) + " rows for " +
                      std::to_string(panel.n) + " ids x " +
                      std::to_string(panel.periods) + " periods");
  panel.state.assign(cells, -1);
  panel.action.assign(cells, -1);
  for (const Row& r : rows) {
    std::size_t idx = static_cast<std::size_t>(r.id) * panel.periods + r.t;
    if (panel.state[idx] >= 0)
      throw ConfigError("panel csv: duplicate row for id " + std::to_string(r.id) +
                        ", t " + std::to_string(r.t));
    panel.state[idx] = static_cast<std::int32_t>(r.state);
    panel.action[idx] = static_cast<std::int32_t>(r.action);
  }
  return panel;
}

std::string kernel_csv(const TransitionKernel& kernel) {
  std::string out = "a,from,to,prob\n";
  for (int a = 0; a < kernel.num_actions; ++a)
    for (int from = 0; from < kernel.num_states; ++from)
      for (int to = 0; to < kernel.num_states; ++to) {
        out += std::to_string(a);
        out += ',';
        out += std::to_string(from);
        out += ',';
        out += std::to_string(to);
        out += ',';
        out += format_double(kernel.at(a, from, to));
        out += '\n';
      }
  return out;
}

TransitionKernel parse_kernel_csv(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty()) throw ConfigError("kernel csv: empty file");
  if (lines.front() != "a,from,to,prob")
    csv_fail("kernel", 0, "header must be \"a,from,to,prob\"");
  struct Row {
    long a, from, to;
    double prob;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  long max_a = -1, max_s = -1;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    auto f = split_fields(lines[k]);
    if (f.size() != 4) csv_fail("kernel", k, "expected 4 fields");
    Row r;
    r.a = field_long(f[0], "kernel", k);
    r.from = field_long(f[1], "kernel", k);
    r.to = field_long(f[2], "kernel", k);
    r.prob = field_double(f[3], "kernel", k);
    if (r.a < 0 || r.from < 0 || r.to < 0)
      csv_fail("kernel", k, "indices must be >= 0");
    rows.push_back(r);
    max_a = std::max(max_a, r.a);
    max_s = std::max({max_s, r.from, r.to});
  }
  if (rows.empty()) throw ConfigError("kernel csv: no data rows");
  int A = static_cast<int>(max_a + 1);
  int S = static_cast<int>(max_s + 1);
  std::size_t want = static_cast<std::size_t>(A) * S * S;
  if (rows.size() != want)
    throw ConfigError("kernel csv: " + std::to_string(rows.size()) + " rows for a " +
                      std::to_string(A) + " action, " + std::to_string(S) +
                      " state kernel (need " + std::to_string(want) + ")");
  TransitionKernel kernel = TransitionKernel::zeros(A, S);
  std::vector<char> seen(want, 0);
  for (const Row& r : rows) {
    std::size_t idx = (static_cast<std::size_t>(r.a) * S + r.from) * S + r.to;
    if (seen[idx])
      throw ConfigError("kernel csv: duplicate cell (" + std::to_string(r.a) + "," +
                        std::to_string(r.from) + "," + std::to_string(r.to) + ")");
    seen[idx] = 1;
    kernel.probs[idx] = r.prob;
  }
  return kernel;
}

std::string value_csv(const ValueFunction& vf) {
  std::string out = "period,state,value\n";
  auto emit = [&](int period, const std::vector<double>& v) {
    for (std::size_t s = 0; s < v.size(); ++s) {
      out += std::to_string(period);
      out += ',';
      out += std::to_string(s);
      out += ',';
      out += format_double(v[s]);
      out += '\n';
    }
  };
  if (!vf.horizon.is_finite()) {
    emit(0, vf.v.front());
  } else {
    for (std::size_t t = 0; t < vf.v.size(); ++t)
      emit(static_cast<int>(t + 1), vf.v[t]);
  }
  return out;
}

std::string ccp_csv(const std::vector<CcpTable>& tables, bool finite) {
  std::string out = "period,state,action,prob\n";
  auto emit = [&](int period, const CcpTable& table) {
    for (int s = 0; s < table.num_states; ++s)
      for (int a = 0; a < table.num_actions; ++a) {
        out += std::to_string(period);
        out += ',';
        out += std::to_string(s);
        out += ',';
        out += std::to_string(a);
        out += ',';
        out += format_double(table.at(s, a));
        out += '\n';
      }
  };
  if (!finite) {
    emit(0, tables.front());
  } else {
    for (std::size_t t = 0; t < tables.size(); ++t)
      emit(static_cast<int>(t + 1), tables[t]);
  }
  return out;
}

std::string cdf_csv(const StepCdf& cdf) {
  std::string out = "b,cdf\n";
  for (std::size_t k = 0; k < cdf.at.size(); ++k) {
    out += format_double(cdf.at[k]);
    out += ',';
    out += format_double(cdf.cum[k]);
    out += '\n';
  }
  return out;
}

json estimate_json(const EstimateResult& r) {
  json j;
  j["gamma"] = r.gamma;
  j["loglik"] = r.loglik;
  j["active_types"] = r.active_types;
  j["search_converged"] = r.search_converged;
  j["profile_evals"] = r.profile_evals;
  j["em_iterations"] = r.em_iterations;
  j["inner_residual"] = r.inner_residual;
  json sieve;
  sieve["cells"] = r.sieve.cells;
  sieve["points"] = r.sieve.points;
  json weights = json::array();
  for (int k = 0; k < r.sieve.cells; ++k) {
    std::vector<double> row(r.sieve.size());
    for (int jj = 0; jj < r.sieve.size(); ++jj) row[jj] = r.sieve.weight(k, jj);
    weights.push_back(std::move(row));
  }
  sieve["weights"] = std::move(weights);
  j["sieve"] = std::move(sieve);
  json trace = json::array();
  for (const auto& [g, ll] : r.trace)
    trace.push_back(json{{"gamma", g}, {"loglik", ll}});
  j["trace"] = std::move(trace);
  return j;
}

json mc_summary_json(const McSummary& summary) {
  json cells = json::array();
  for (const McCell& c : summary.cells) {
    json jc;
    jc["n"] = c.n;
    jc["replications"] = c.replications;
    jc["failures"] = c.failures;
    jc["grid_points"] = c.grid_points;
    jc["bias"] = c.bias;
    jc["variance"] = c.variance;
    jc["mse"] = c.mse;
    jc["bias_scaled"] = c.bias_scaled;
    jc["variance_scaled"] = c.variance_scaled;
    jc["mse_scaled"] = c.mse_scaled;
    jc["mise"] = c.mise;
    jc["iae_mean"] = c.iae_mean;
    jc["iae_min"] = c.iae_min;
    jc["iae_max"] = c.iae_max;
    jc["active_mean"] = c.active_mean;
    jc["active_min"] = c.active_min;
    jc["active_max"] = c.active_max;
    json reps = json::array();
    for (const McRep& r : c.reps) {
      json jr;
      jr["ok"] = r.ok;
      if (r.ok) {
        jr["gamma_hat"] = r.gamma_hat;
        jr["ise"] = r.ise;
        jr["iae"] = r.iae;
        jr["active_types"] = r.active_types;
      } else {
        jr["error"] = r.error;
      }
      reps.push_back(std::move(jr));
    }
    jc["reps"] = std::move(reps);
    cells.push_back(std::move(jc));
  }
  return json{{"cells", std::move(cells)}};
}

std::string mc_table_csv(const McSummary& summary) {
  std::string out = "metric";
  for (const McCell& c : summary.cells) out += ",n=" + std::to_string(c.n);
  out += '\n';
  auto row_d = [&](const std::string& name, auto get) {
    out += name;
    for (const McCell& c : summary.cells) {
      out += ',';
      out += format_double(get(c));
    }
    out += '\n';
  };
  auto row_i = [&](const std::string& name, auto get) {
    out += name;
    for (const McCell& c : summary.cells) {
      out += ',';
      out += std::to_string(get(c));
    }
    out += '\n';
  };
  std::size_t gdim = summary.cells.empty() ? 0 : summary.cells.front().bias.size();
  for (std::size_t d = 0; d < gdim; ++d) {
    std::string suffix = "_gamma" + std::to_string(d + 1);
    row_d("bias" + suffix, [d](const McCell& c) { return c.bias[d]; });
    row_d("sqrt_n_bias" + suffix, [d](const McCell& c) { return c.bias_scaled[d]; });
    row_d("variance" + suffix, [d](const McCell& c) { return c.variance[d]; });
    row_d("n_variance" + suffix,
          [d](const McCell& c) { return c.variance_scaled[d]; });
    row_d("mse" + suffix, [d](const McCell& c) { return c.mse[d]; });
    row_d("n_mse" + suffix, [d](const McCell& c) { return c.mse_scaled[d]; });
  }
  row_d("mise", [](const McCell& c) { return c.mise; });
  row_d("iae_mean", [](const McCell& c) { return c.iae_mean; });
  row_d("iae_min", [](const McCell& c) { return c.iae_min; });
  row_d("iae_max", [](const McCell& c) { return c.iae_max; });
  row_d("active_mean", [](const McCell& c) { return c.active_mean; });
  row_i("active_min", [](const McCell& c) { return c.active_min; });
  row_i("active_max", [](const McCell& c) { return c.active_max; });
  row_i("grid_points", [](const McCell& c) { return c.grid_points; });
  row_i("replications", [](const McCell& c) { return c.replications; });
  row_i("failures", [](const McCell& c) { return c.failures; });
  return out;
}

json mc_timings_json(const McSummary& summary) {
  json cells = json::array();
  for (const McCell& c : summary.cells) {
    cells.push_back(json{{"n", c.n},
                         {"seconds_mean", c.seconds_mean},
                         {"seconds_median", c.seconds_median}});
  }
  return json{{"cells", std::move(cells)}};
}

json rank_json(const RatioMatrix& matrix, const RankEstimate& estimate) {
  json j;
  j["conditioning"] = json{{"a1", matrix.conditioning.a1},
                           {"a2", matrix.conditioning.a2},
                           {"a3", matrix.conditioning.a3},
                           {"x1", matrix.conditioning.x1}};
  j["x3_rows"] = matrix.x3_index;
  j["x2_cols"] = matrix.x2_index;
  json dropped = json::array();
  for (const auto& [x3, x2] : matrix.dropped)
    dropped.push_back(json::array({x3, x2}));
  j["dropped"] = std::move(dropped);
  json m = json::array();
  for (Eigen::Index r = 0; r < matrix.m.rows(); ++r) {
    std::vector<double> row(matrix.m.cols());
    for (Eigen::Index cidx = 0; cidx < matrix.m.cols(); ++cidx)
      row[cidx] = matrix.m(r, cidx);
    m.push_back(std::move(row));
  }
  j["matrix"] = std::move(m);
  j["singular_values"] = estimate.singular_values;
  j["rank"] = estimate.rank;
  return j;
}

json ident_json(const OperatorBundle& bundle, const InjectivityDiagnostic& diag,
                const SpectralRecovery* recovery, const std::string& recovery_error) {
  json j;
  j["conditioning"] = json{{"a1", bundle.conditioning.a1},
                           {"a4", bundle.conditioning.a4},
                           {"x1", bundle.conditioning.x1},
                           {"x4", bundle.conditioning.x4}};
  j["residual_342"] = bundle.residual_342;
  j["residual_32"] = bundle.residual_32;
  j["injectivity"] = json{{"min_sv_l3b", diag.min_sv_l3b},
                          {"min_sv_lb2t", diag.min_sv_lb2t}};
  if (recovery != nullptr) {
    j["true_eigenvalues"] = recovery->true_eigenvalues;
    j["recovered_eigenvalues"] = recovery->recovered_eigenvalues;
    j["min_eigen_gap"] = recovery->min_eigen_gap;
    j["max_ccp_error"] = recovery->max_ccp_error;
  }
  if (!recovery_error.empty()) j["recovery_error"] = recovery_error;
  return j;
}

json violations_json(const std::vector<Violation>& violations) {
  json list = json::array();
  for (const Violation& v : violations) {
    json jv;
    jv["code"] = v.code;
    if (v.action >= 0) jv["action"] = v.action;
    if (v.i >= 0) jv["i"] = v.i;
    if (v.j >= 0) jv["j"] = v.j;
    jv["message"] = v.message;
    list.push_back(std::move(jv));
  }
  return json{{"ok", violations.empty()}, {"violations", std::move(list)}};
}

}  // namespace ddc::io
