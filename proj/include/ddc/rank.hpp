#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "ddc/model.hpp"
#include "ddc/simulate.hpp"

// Number-of-types estimation: the matrix
//   M[x3][x2] = f(a3,a2,a1,x3,x2 | x1) / ( F(x3|x2,a2) * F(x2|x1,a1) )
// at fixed (a1,a2,a3,x1) has rank equal to the number of type support points
// with linearly independent CCP vectors. Rank is read off the singular values.

namespace ddc {

struct DiscreteTypeSet {
  std::vector<std::vector<double>> betas;
  std::vector<double> weights;

  void check() const;
  int count() const { return static_cast<int>(betas.size()); }
};

struct RankConditioning {
  int a1 = 0;
  int a2 = 0;
  int a3 = 0;
  int x1 = 0;
};

struct RatioMatrix {
  Eigen::MatrixXd m;  // retained x3 rows by retained x2 columns
  std::vector<int> x3_index, x2_index;
  RankConditioning conditioning;
  std::vector<std::pair<int, int>> dropped;  // (x3, x2) cells below floor/count
};

// Exact joint probabilities f(a3,a2,a1,x3,x2 | x1) over (x3, x2) at the fixed
// conditioning, from solver CCPs: sum_r w_r P_r(a1;x1) F(x2|x1,a1) P_r(a2;x2)
// F(x3|x2,a2) P_r(a3;x3). Initial state x1 is conditioned on, so no initial
// distribution enters.
Eigen::MatrixXd population_joint(const ModelSpec& spec, const StateGrid& grid,
                                 const TransitionKernel& kernel,
                                 std::span<const double> gamma,
                                 const DiscreteTypeSet& types, RankConditioning cond);

// Frequency estimates of the same joint from the first three panel periods,
// with raw cell counts for the drop rule.
Eigen::MatrixXd empirical_joint(const Panel& panel, int num_states,
                                RankConditioning cond, Eigen::MatrixXi& counts);

// Entries below the positivity floor in a denominator are dropped; in sample
// mode cells with fewer than min_count observations are dropped too. Rows and
// columns that lose every cell are removed.
RatioMatrix build_ratio_matrix(const Eigen::MatrixXd& joint,
                               const TransitionKernel& kernel, RankConditioning cond,
                               double floor = 1e-8,
                               const Eigen::MatrixXi* counts = nullptr,
                               int min_count = 5);

struct RankEstimate {
  int rank = 0;
  std::vector<double> singular_values;
};

// Counts singular values above rel_threshold * sigma_1 (population use) or
// above abs_threshold when that is positive (sample use).
RankEstimate estimate_rank(const RatioMatrix& matrix, double rel_threshold = 1e-6,
                           double abs_threshold = 0.0);

}  // namespace ddc
