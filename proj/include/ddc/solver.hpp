#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddc/model.hpp"

// Integrated value functions and conditional choice probabilities for one
// type. Infinite horizon: plain contraction iteration on
//   v(x) = log sum_a exp( u(x,a) + rho * E[v(x')|x,a] ) + gamma_EM,
// gamma_EM the Euler-Mascheroni constant; log-sum-exp is always max-shifted.
// Finite horizon: backward recursion from v_{T1+1} = 0, so the last period's
// choice probabilities are the static logit of the period payoff.

namespace ddc {

struct ValueFunction {
  Horizon horizon = Horizon::infinite();
  // Infinite: one entry. Finite: v[t-1] is period t's integrated value, t=1..T1.
  std::vector<std::vector<double>> v;
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;

  const std::vector<double>& stationary() const;
};

struct CcpTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> probs;  // [s*num_actions + a]

  double at(int s, int a) const {
    return probs[static_cast<std::size_t>(s) * num_actions + a];
  }
  const double* row(int s) const {
    return probs.data() + static_cast<std::size_t>(s) * num_actions;
  }
};

// One Bellman application to v (values over the grid).
std::vector<double> bellman_apply(const ModelSpec& spec, const PayoffParams& params,
                                  const StateGrid& grid, const TransitionKernel& kernel,
                                  const std::vector<double>& v);

ValueFunction solve_infinite(const ModelSpec& spec, const PayoffParams& params,
                             const StateGrid& grid, const TransitionKernel& kernel,
                             double tol = 1e-10, int max_iter = 10000);

// params_per_period / kernel_per_period: either one entry (stationary) or T1
// entries, period 1 first.
ValueFunction solve_finite(const ModelSpec& spec,
                           const std::vector<PayoffParams>& params_per_period,
                           const StateGrid& grid,
                           const std::vector<TransitionKernel>& kernel_per_period,
                           int t1);

// CCPs from a solved stationary value function.
CcpTable ccp(const ModelSpec& spec, const PayoffParams& params, const StateGrid& grid,
             const TransitionKernel& kernel, const std::vector<double>& v);

// Per-period CCPs from a finite-horizon solution.
std::vector<CcpTable> ccp_finite(const ModelSpec& spec,
                                 const std::vector<PayoffParams>& params_per_period,
                                 const StateGrid& grid,
                                 const std::vector<TransitionKernel>& kernel_per_period,
                                 const ValueFunction& vf);

struct SolvedModel {
  ValueFunction value;
  std::vector<CcpTable> ccps;  // one entry for infinite horizon

  const CcpTable& ccp_at(int t) const {
    return ccps.size() == 1 ? ccps.front() : ccps.at(t);
  }
};

SolvedModel solve_model(const ModelSpec& spec, const PayoffParams& params,
                        const StateGrid& grid, const TransitionKernel& kernel,
                        double tol = 1e-10, int max_iter = 10000);

// Memoizes solve_model results on the exact bit patterns of (gamma, beta).
class CcpCache {
 public:
  CcpCache(const ModelSpec& spec, const StateGrid& grid, const TransitionKernel& kernel,
           double tol = 1e-10, int max_iter = 10000)
      : spec_(spec), grid_(grid), kernel_(kernel), tol_(tol), max_iter_(max_iter) {}

  const SolvedModel& get(const PayoffParams& params);
  std::size_t size() const;

 private:
  const ModelSpec& spec_;
  const StateGrid& grid_;
  const TransitionKernel& kernel_;
  double tol_;
  int max_iter_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::unique_ptr<SolvedModel>> map_;
};

}  // namespace ddc
