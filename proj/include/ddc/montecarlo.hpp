#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddc/mixture.hpp"
#include "ddc/model.hpp"
#include "ddc/simulate.hpp"

// Replication harness: per (sample size, replication) simulate a panel,
// estimate the transition and the mixture, and aggregate the usual table
// statistics. Replications run in parallel on per-replication RNG streams
// derived from (seed, n, m), so results are independent of thread count.

namespace ddc {

struct McDesign {
  ModelSpec spec;
  StateGrid grid;
  TransitionKernel kernel;
  std::vector<double> gamma;
  MixtureSpec mixture;
  int periods = 8;
  std::vector<double> init_dist;  // empty = uniform

  // Binary-choice design: u(x,1) = beta*x1 + gamma*x2 on a 15-point product
  // grid over [0,4]^2, AR(1)-style transitions where action 1 shifts the x2
  // drift, rho = 0.9, gamma = 0.5, types from an equal-weight mixture of
  // three truncated normals on [0,50].
  static McDesign baseline();
};

struct McConfig {
  std::vector<int> sample_sizes{100, 500, 1000};
  int replications = 100;
  std::uint64_t seed = 20250815;
  EstimatorConfig estimator;
  bool use_true_kernel = false;  // skip step 1, hand the estimator the DGP kernel

  void check() const;
};

struct McRep {
  bool ok = false;
  std::vector<double> gamma_hat;
  double ise = 0.0;
  double iae = 0.0;
  int active_types = 0;
  double seconds = 0.0;
  std::string error;
};

struct McCell {
  int n = 0;
  int replications = 0;  // successful
  int failures = 0;
  int grid_points = 0;
  // Per gamma coordinate; *_scaled uses sqrt(n) for bias, n for var/mse.
  std::vector<double> bias, variance, mse;
  std::vector<double> bias_scaled, variance_scaled, mse_scaled;
  double mise = 0.0;
  double iae_mean = 0.0, iae_min = 0.0, iae_max = 0.0;
  double active_mean = 0.0;
  int active_min = 0, active_max = 0;
  double seconds_mean = 0.0, seconds_median = 0.0;
  std::vector<McRep> reps;
};

struct McSummary {
  std::vector<McCell> cells;
};

McSummary run_monte_carlo(const McDesign& design, const McConfig& config);

}  // namespace ddc
