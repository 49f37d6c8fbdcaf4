#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "ddc/model.hpp"
#include "ddc/simulate.hpp"
#include "ddc/solver.hpp"

// Second estimation step: fixed-grid sieve maximum likelihood over the type
// distribution. The type CDF is approximated by weights on fixed grid points
// b_j (per initial-state cell k); the inner problem in the weights is convex
// and solved by EM; the common parameters gamma are profiled out by a
// derivative-free search.

namespace ddc {

// ceil(4 * n^(1/4)) grid points.
int grid_rule(std::int64_t n);

struct SieveDistribution {
  std::vector<std::vector<double>> points;  // b_j
  int cells = 1;                            // initial-state cells k
  std::vector<double> weights;              // [k*B + j], each row on the simplex

  int size() const { return static_cast<int>(points.size()); }
  double weight(int cell, int j) const {
    return weights[static_cast<std::size_t>(cell) * size() + j];
  }
};

struct TypeLikelihoodMatrix {
  int n = 0;
  int types = 0;
  std::vector<double> loglik;  // [i*types + j]

  double log_at(int i, int j) const {
    return loglik[static_cast<std::size_t>(i) * types + j];
  }
  // Plain product of per-period choice probabilities.
  double at(int i, int j) const;
};

// L[i][j] = prod_t P(a_it; x_it, b_j), accumulated in log space. Solves the
// model once per grid point (in parallel); solver failures name the point.
TypeLikelihoodMatrix type_likelihood_matrix(const ModelSpec& spec,
                                            const StateGrid& grid,
                                            const TransitionKernel& kernel,
                                            std::span<const double> gamma,
                                            const std::vector<std::vector<double>>& points,
                                            const Panel& panel,
                                            double solver_tol = 1e-10,
                                            int solver_max_iter = 10000);

struct InnerSolveResult {
  std::vector<double> weights;  // [k*B + j]
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // loglik after each EM iteration
};

// Maximizes sum_i m_i log sum_j P_{j,k(i)} L[i][j] over simplex weights per
// cell via the EM fixed point. cell_of[i] in [0, cells); empty = one cell.
// obs_mass weights observations (empty = 1; used for population-exact
// problems). init empty = uniform rows.
InnerSolveResult inner_weight_solve(const TypeLikelihoodMatrix& L,
                                    std::span<const int> cell_of, int cells,
                                    double tol = 1e-9, int max_iter = 5000,
                                    std::span<const double> init = {},
                                    std::span<const double> obs_mass = {});

struct EstimatorConfig {
  double beta_lo = 0.0;
  double beta_hi = 6.0;
  int grid_points = 0;  // 0 = grid_rule(n)
  std::vector<std::vector<double>> explicit_points;  // overrides the 1-D rule
  int cells = 1;
  std::vector<int> cell_of_state;  // initial state -> cell; empty = all cell 0
  std::vector<double> gamma_lo{-1.0}, gamma_hi{2.0};
  double gamma_tol = 1e-3;
  int max_profile_evals = 200;
  double em_tol = 1e-9;
  int em_max_iter = 5000;
  double solver_tol = 1e-10;
  int solver_max_iter = 10000;
  double active_threshold = 1e-3;
};

struct ProfilePoint {
  double loglik = 0.0;
  InnerSolveResult inner;
};

ProfilePoint profile_objective(const ModelSpec& spec, const StateGrid& grid,
                               const TransitionKernel& kernel, const Panel& panel,
                               const std::vector<std::vector<double>>& points,
                               std::span<const double> gamma,
                               const EstimatorConfig& config);

struct EstimateResult {
  std::vector<double> gamma;
  SieveDistribution sieve;
  double loglik = 0.0;
  int active_types = 0;
  bool search_converged = true;
  int profile_evals = 0;
  long em_iterations = 0;
  double inner_residual = 0.0;  // final EM relative objective change
  double seconds = 0.0;
  std::vector<std::pair<std::vector<double>, double>> trace;  // (gamma, loglik)
};

// Step 2 given an estimated (or true) kernel: profile search over gamma
// (golden section when gamma is scalar, Nelder-Mead otherwise).
EstimateResult estimate(const Panel& panel, const StateGrid& grid,
                        const TransitionKernel& kernel_est, const ModelSpec& spec,
                        const EstimatorConfig& config);

struct StepCdf {
  std::vector<double> at;   // ascending jump locations
  std::vector<double> cum;  // CDF value from at[k] onward

  double operator()(double b) const;
};

// Marginal CDF of coordinate `coord` of the sieve points in one cell.
StepCdf estimated_cdf(const SieveDistribution& sieve, int cell = 0, int coord = 0);

struct ErrorMetrics {
  double iae = 0.0;  // integral of |est - truth|
  double ise = 0.0;  // integral of (est - truth)^2
};

// Adaptive trapezoid integration of the CDF gap on [lo, hi], subdivided at
// the union of both functions' jump points.
ErrorMetrics error_metrics(const std::function<double(double)>& est,
                           std::span<const double> est_knots,
                           const std::function<double(double)>& truth,
                           std::span<const double> truth_knots, double lo, double hi,
                           double tol = 1e-8);

// Grid points whose mass, aggregated over cells weighted by cell_mass
// (empty = equal), exceeds the threshold.
int count_active_types(const SieveDistribution& sieve,
                       std::span<const double> cell_mass = {},
                       double threshold = 1e-3);

}  // namespace ddc
