#include "ddc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "ddc/error.hpp"
#include "ddc/kernels.hpp"

namespace ddc {

namespace {

constexpr double egamma = std::numbers::egamma_v<double>;

// Choice-specific values w[s*A+a] = u(s,a) + rho * sum_to v[to]*F(to|s,a).
void choice_values(const ModelSpec& spec, const std::vector<double>& u,
                   const TransitionKernel& kernel, const std::vector<double>& v,
                   std::vector<double>& w, std::vector<double>& ev_scratch) {
  const int S = kernel.num_states;
  const int A = spec.num_actions;
  const double rho = spec.discount;
  for (int a = 0; a < A; ++a) {
    double* ev = ev_scratch.data();
    kernels::matvec(kernel.row(a, 0), S, S, v.data(), ev);
    for (int s = 0; s < S; ++s) {
      w[static_cast<std::size_t>(s) * A + a] =
          u[static_cast<std::size_t>(s) * A + a] + rho * ev[s];
    }
  }
}

// v'(s) = logsumexp_a w(s,a) + egamma, max-shifted.
void integrate_values(const std::vector<double>& w, int S, int A,
                      std::vector<double>& out) {
  for (int s = 0; s < S; ++s) {
    const double* ws = w.data() + static_cast<std::size_t>(s) * A;
    double m = ws[0];
    for (int a = 1; a < A; ++a) m = std::max(m, ws[a]);
    double sum = 0.0;
    for (int a = 0; a < A; ++a) sum += std::exp(ws[a] - m);
    double val = m + std::log(sum) + egamma;
    if (!std::isfinite(val)) {
      throw NumericError("bellman: non-finite value at state " + std::to_string(s));
    }
    out[s] = val;
  }
}

void ccp_from_choice_values(const std::vector<double>& w, int S, int A,
                            CcpTable& table) {
  table.num_states = S;
  table.num_actions = A;
  table.probs.resize(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    const double* ws = w.data() + static_cast<std::size_t>(s) * A;
    double* ps = table.probs.data() + static_cast<std::size_t>(s) * A;
    double m = ws[0];
    for (int a = 1; a < A; ++a) m = std::max(m, ws[a]);
    double sum = 0.0;
    for (int a = 0; a < A; ++a) {
      ps[a] = std::exp(ws[a] - m);
      sum += ps[a];
    }
    for (int a = 0; a < A; ++a) ps[a] /= sum;
  }
}

void check_shapes(const ModelSpec& spec, const PayoffParams& params,
                  const StateGrid& grid, const TransitionKernel& kernel) {
  params.check(spec);
  if (grid.dim != spec.state_dim) {
    throw ConfigError("solver: grid dimension does not match model");
  }
  if (kernel.num_actions != spec.num_actions || kernel.num_states != grid.size()) {
    throw ConfigError("solver: kernel shape does not match model/grid");
  }
}

}  // namespace

const std::vector<double>& ValueFunction::stationary() const {
  if (horizon.is_finite() || v.size() != 1) {
    throw ConfigError("value function is not a stationary solution");
  }
  return v.front();
}

std::vector<double> bellman_apply(const ModelSpec& spec, const PayoffParams& params,
                                  const StateGrid& grid, const TransitionKernel& kernel,
                                  const std::vector<double>& v) {
  check_shapes(spec, params, grid, kernel);
  const int S = grid.size();
  const int A = spec.num_actions;
  if (static_cast<int>(v.size()) != S) {
    throw ConfigError("bellman_apply: value vector has wrong length");
  }
  std::vector<double> u = payoff_table(spec, params, grid);
  std::vector<double> w(static_cast<std::size_t>(S) * A);
  std::vector<double> ev(S);
  std::vector<double> out(S);
  choice_values(spec, u, kernel, v, w, ev);
  integrate_values(w, S, A, out);
  return out;
}

ValueFunction solve_infinite(const ModelSpec& spec, const PayoffParams& params,
                             const StateGrid& grid, const TransitionKernel& kernel,
                             double tol, int max_iter) {
  check_shapes(spec, params, grid, kernel);
  if (!(tol > 0.0)) throw ConfigError("solve_infinite: tol must be positive");
  const int S = grid.size();
  const int A = spec.num_actions;
  std::vector<double> u = payoff_table(spec, params, grid);

  ValueFunction vf;
  vf.horizon = Horizon::infinite();
  std::vector<double> v(S, 0.0);
  std::vector<double> next(S);
  std::vector<double> w(static_cast<std::size_t>(S) * A);
  std::vector<double> ev(S);

  double res = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    choice_values(spec, u, kernel, v, w, ev);
    integrate_values(w, S, A, next);
    res = kernels::max_abs_diff(v.data(), next.data(), S);
    v.swap(next);
    vf.iterations = it;
    if (res <= tol) {
      vf.residual = res;
      vf.converged = true;
      vf.v.push_back(std::move(v));
      return vf;
    }
  }
  vf.residual = res;
  vf.converged = false;
  vf.v.push_back(std::move(v));
  return vf;
}

ValueFunction solve_finite(const ModelSpec& spec,
                           const std::vector<PayoffParams>& params_per_period,
                           const StateGrid& grid,
                           const std::vector<TransitionKernel>& kernel_per_period,
                           int t1) {
  if (t1 < 1) throw ConfigError("solve_finite: need at least one period");
  if (params_per_period.empty() || kernel_per_period.empty()) {
    throw ConfigError("solve_finite: empty per-period inputs");
  }
  auto param_at = [&](int t) -> const PayoffParams& {
    return params_per_period.size() == 1 ? params_per_period.front()
                                         : params_per_period.at(t);
  };
  auto kernel_at = [&](int t) -> const TransitionKernel& {
    return kernel_per_period.size() == 1 ? kernel_per_period.front()
                                         : kernel_per_period.at(t);
  };
  if (params_per_period.size() != 1 &&
      static_cast<int>(params_per_period.size()) != t1) {
    throw ConfigError("solve_finite: params_per_period must have 1 or T1 entries");
  }
  if (kernel_per_period.size() != 1 &&
      static_cast<int>(kernel_per_period.size()) != t1) {
    throw ConfigError("solve_finite: kernel_per_period must have 1 or T1 entries");
  }
  for (int t = 0; t < t1; ++t) check_shapes(spec, param_at(t), grid, kernel_at(t));

  const int S = grid.size();
  const int A = spec.num_actions;
  ValueFunction vf;
  vf.horizon = Horizon::finite(t1);
  vf.v.assign(t1, std::vector<double>(S, 0.0));

  std::vector<double> cont(S, 0.0);  // v_{t+1}, starts at terminal zero
  std::vector<double> w(static_cast<std::size_t>(S) * A);
  std::vector<double> ev(S);
  for (int t = t1 - 1; t >= 0; --t) {
    std::vector<double> u = payoff_table(spec, param_at(t), grid);
    choice_values(spec, u, kernel_at(t), cont, w, ev);
    integrate_values(w, S, A, vf.v[t]);
    cont = vf.v[t];
  }
  vf.iterations = t1;
  vf.residual = 0.0;
  vf.converged = true;
  return vf;
}

CcpTable ccp(const ModelSpec& spec, const PayoffParams& params, const StateGrid& grid,
             const TransitionKernel& kernel, const std::vector<double>& v) {
  check_shapes(spec, params, grid, kernel);
  const int S = grid.size();
  const int A = spec.num_actions;
  if (static_cast<int>(v.size()) != S) {
    throw ConfigError("ccp: value vector has wrong length");
  }
  std::vector<double> u = payoff_table(spec, params, grid);
  std::vector<double> w(static_cast<std::size_t>(S) * A);
  std::vector<double> ev(S);
  choice_values(spec, u, kernel, v, w, ev);
  CcpTable table;
  ccp_from_choice_values(w, S, A, table);
  return table;
}

std::vector<CcpTable> ccp_finite(const ModelSpec& spec,
                                 const std::vector<PayoffParams>& params_per_period,
                                 const StateGrid& grid,
                                 const std::vector<TransitionKernel>& kernel_per_period,
                                 const ValueFunction& vf) {
  if (!vf.horizon.is_finite()) {
    throw ConfigError("ccp_finite: value function is not finite-horizon");
  }
  const int t1 = vf.horizon.periods;
  auto param_at = [&](int t) -> const PayoffParams& {
    return params_per_period.size() == 1 ? params_per_period.front()
                                         : params_per_period.at(t);
  };
  auto kernel_at = [&](int t) -> const TransitionKernel& {
    return kernel_per_period.size() == 1 ? kernel_per_period.front()
                                         : kernel_per_period.at(t);
  };
  const int S = grid.size();
  const int A = spec.num_actions;
  std::vector<CcpTable> out(t1);
  std::vector<double> w(static_cast<std::size_t>(S) * A);
  std::vector<double> ev(S);
  std::vector<double> zeros(S, 0.0);
  for (int t = 0; t < t1; ++t) {
    const std::vector<double>& cont = (t + 1 < t1) ? vf.v[t + 1] : zeros;
    std::vector<double> u = payoff_table(spec, param_at(t), grid);
    choice_values(spec, u, kernel_at(t), cont, w, ev);
    ccp_from_choice_values(w, S, A, out[t]);
  }
  return out;
}

SolvedModel solve_model(const ModelSpec& spec, const PayoffParams& params,
                        const StateGrid& grid, const TransitionKernel& kernel,
                        double tol, int max_iter) {
  SolvedModel sm;
  if (spec.horizon.is_finite()) {
    const int t1 = spec.horizon.periods;
    std::vector<PayoffParams> pp{params};
    std::vector<TransitionKernel> kk{kernel};
    sm.value = solve_finite(spec, pp, grid, kk, t1);
    sm.ccps = ccp_finite(spec, pp, grid, kk, sm.value);
  } else {
    sm.value = solve_infinite(spec, params, grid, kernel, tol, max_iter);
    if (!sm.value.converged) {
      throw ConvergenceError("solver: value iteration did not reach tolerance",
                             sm.value.residual, sm.value.iterations);
    }
    sm.ccps.push_back(ccp(spec, params, grid, kernel, sm.value.stationary()));
  }
  return sm;
}

const SolvedModel& CcpCache::get(const PayoffParams& params) {
  std::string key;
  key.resize((params.gamma.size() + params.beta.size()) * sizeof(double));
  char* p = key.data();
  std::memcpy(p, params.gamma.data(), params.gamma.size() * sizeof(double));
  p += params.gamma.size() * sizeof(double);
  std::memcpy(p, params.beta.data(), params.beta.size() * sizeof(double));

  std::lock_guard<std::mutex> lock(mu_);
  auto it = map_.find(key);
  if (it == map_.end()) {
    auto solved = std::make_unique<SolvedModel>(
        solve_model(spec_, params, grid_, kernel_, tol_, max_iter_));
    it = map_.emplace(std::move(key), std::move(solved)).first;
  }
  return *it->second;
}

std::size_t CcpCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

}  // namespace ddc
