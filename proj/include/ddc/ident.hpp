#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "ddc/model.hpp"
#include "ddc/rank.hpp"

// Numerical check of the operator factorization and spectral identification
// argument for discrete types. With a2 fixed at the outside good and
// conditioning (a1, a4, x1, x4):
//   L342[(a3,x3)][x2] = f(a4,a3,0,a1,x4,x3,x2|x1)
//                       / ( F(x4|x3,a3) F(x3|x2,0) F(x2|x1,a1) )
//   L32 [(a3,x3)][x2] = f(a3,0,a1,x3,x2|x1) / ( F(x3|x2,0) F(x2|x1,a1) )
// factor as L342 = L3b D4 Db Lb2 and L32 = L3b Db Lb2 with
//   L3b[(a3,x3)][r] = P(a3;x3,b_r)      (rows stack every a3)
//   D4[r]           = P(a4;x4,b_r)
//   Db[r]           = P(a1;x1,b_r) w_r
//   Lb2[r][x2]      = P(0;x2,b_r)
// so A = L342 pinv(L32) has eigenvalues D4 and eigenvectors the L3b columns.

namespace ddc {

struct IdentConditioning {
  int a1 = 0;
  int a4 = 0;
  int x1 = 0;
  int x4 = 0;
};

struct OperatorBundle {
  Eigen::MatrixXd l342, l32;  // (A*S) x S, row index a3*S + x3
  Eigen::MatrixXd l3b;        // (A*S) x R
  Eigen::VectorXd d4, db;     // R
  Eigen::MatrixXd lb2;        // R x S
  IdentConditioning conditioning;
  double residual_342 = 0.0;
  double residual_32 = 0.0;
};

// Builds every matrix from exact solver CCPs and verifies the factorization
// residuals against residual_tol (a failure is a construction bug).
OperatorBundle build_operators(const ModelSpec& spec, const StateGrid& grid,
                               const TransitionKernel& kernel,
                               std::span<const double> gamma,
                               const DiscreteTypeSet& types, IdentConditioning cond,
                               double residual_tol = 1e-10);

struct InjectivityDiagnostic {
  double min_sv_l3b = 0.0;
  double min_sv_lb2t = 0.0;
};

InjectivityDiagnostic injectivity_diagnostic(const OperatorBundle& bundle);

struct SpectralRecovery {
  std::vector<double> true_eigenvalues;       // P(a4;x4,b_r) per type
  std::vector<double> recovered_eigenvalues;  // matched to types
  Eigen::MatrixXd recovered_ccp;              // (A*S) x R, matched + rescaled
  double max_ccp_error = 0.0;
  double min_eigen_gap = 0.0;
};

// Eigendecomposition of L342 * pinv(L32); throws NumericError("eigenvalue
// collision ...") when two true eigenvalues are closer than gap_tol.
SpectralRecovery spectral_recover(const OperatorBundle& bundle, double gap_tol = 1e-8,
                                  double pinv_rel_cutoff = 1e-12);

}  // namespace ddc
