#include "ddc/ident.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "ddc/error.hpp"
#include "ddc/solver.hpp"

namespace ddc {

OperatorBundle build_operators(const ModelSpec& spec, const StateGrid& grid,
                               const TransitionKernel& kernel,
                               std::span<const double> gamma,
                               const DiscreteTypeSet& types, IdentConditioning cond,
                               double residual_tol) {
  types.check();
  const int S = grid.size();
  const int A = spec.num_actions;
  const int R = types.count();
  if (cond.a1 < 0 || cond.a1 >= A || cond.a4 < 0 || cond.a4 >= A || cond.x1 < 0 ||
      cond.x1 >= S || cond.x4 < 0 || cond.x4 >= S) {
    throw ConfigError("ident: conditioning indices out of range");
  }

  CcpCache cache(spec, grid, kernel);
  std::vector<const CcpTable*> ccp(R);
  PayoffParams params;
  params.gamma.assign(gamma.begin(), gamma.end());
  for (int r = 0; r < R; ++r) {
    params.beta = types.betas[r];
    ccp[r] = &cache.get(params).ccp_at(0);
  }

  OperatorBundle b;
  b.conditioning = cond;
  b.l3b.resize(A * S, R);
  b.d4.resize(R);
  b.db.resize(R);
  b.lb2.resize(R, S);
  for (int r = 0; r < R; ++r) {
    for (int a3 = 0; a3 < A; ++a3) {
      for (int x3 = 0; x3 < S; ++x3) {
        b.l3b(a3 * S + x3, r) = ccp[r]->at(x3, a3);
      }
    }
    b.d4(r) = ccp[r]->at(cond.x4, cond.a4);
    b.db(r) = ccp[r]->at(cond.x1, cond.a1) * types.weights[r];
    for (int x2 = 0; x2 < S; ++x2) b.lb2(r, x2) = ccp[r]->at(x2, 0);
  }

  // Observable side: joints over (a3,x3,x2) with a2 fixed at the outside
  // good, divided by the transition chain. x4 integrates out of the L32
  // joint, so the same CCP factorization holds for both operators.
  b.l342 = Eigen::MatrixXd::Zero(A * S, S);
  b.l32 = Eigen::MatrixXd::Zero(A * S, S);
  for (int a3 = 0; a3 < A; ++a3) {
    for (int x3 = 0; x3 < S; ++x3) {
      for (int x2 = 0; x2 < S; ++x2) {
        double f342 = 0.0, f32 = 0.0;
        for (int r = 0; r < R; ++r) {
          double common = types.weights[r] * ccp[r]->at(cond.x1, cond.a1) *
                          kernel.at(cond.a1, cond.x1, x2) * ccp[r]->at(x2, 0) *
                          kernel.at(0, x2, x3) * ccp[r]->at(x3, a3);
          f32 += common;
          f342 += common * kernel.at(a3, x3, cond.x4) * ccp[r]->at(cond.x4, cond.a4);
        }
        double d32 = kernel.at(0, x2, x3) * kernel.at(cond.a1, cond.x1, x2);
        double d342 = kernel.at(a3, x3, cond.x4) * d32;
        if (!(d32 > 0.0) || !(d342 > 0.0)) {
          throw NumericError("ident: zero transition probability in a denominator");
        }
        b.l32(a3 * S + x3, x2) = f32 / d32;
        b.l342(a3 * S + x3, x2) = f342 / d342;
      }
    }
  }

  Eigen::MatrixXd prod32 = b.l3b * b.db.asDiagonal() * b.lb2;
  Eigen::MatrixXd prod342 = b.l3b * b.d4.asDiagonal() * b.db.asDiagonal() * b.lb2;
  b.residual_32 = (b.l32 - prod32).cwiseAbs().maxCoeff();
  b.residual_342 = (b.l342 - prod342).cwiseAbs().maxCoeff();
  if (!(b.residual_32 <= residual_tol) || !(b.residual_342 <= residual_tol)) {
    throw NumericError("ident: factorization residual above tolerance (build bug)");
  }
  return b;
}

InjectivityDiagnostic injectivity_diagnostic(const OperatorBundle& bundle) {
  InjectivityDiagnostic d;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd3b(bundle.l3b);
  Eigen::JacobiSVD<Eigen::MatrixXd> svdb2(bundle.lb2.transpose());
  d.min_sv_l3b = svd3b.singularValues().minCoeff();
  d.min_sv_lb2t = svdb2.singularValues().minCoeff();
  return d;
}

namespace {

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_cutoff) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double cut = sv.size() > 0 ? rel_cutoff * sv(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

SpectralRecovery spectral_recover(const OperatorBundle& bundle, double gap_tol,
                                  double pinv_rel_cutoff) {
  const int R = static_cast<int>(bundle.d4.size());
  const Eigen::Index rows = bundle.l3b.rows();

  SpectralRecovery rec;
  rec.true_eigenvalues.assign(bundle.d4.data(), bundle.d4.data() + R);
  rec.min_eigen_gap = std::numeric_limits<double>::infinity();
  for (int r = 0; r < R; ++r) {
    for (int s = r + 1; s < R; ++s) {
      rec.min_eigen_gap =
          std::min(rec.min_eigen_gap, std::fabs(bundle.d4(r) - bundle.d4(s)));
    }
  }
  if (R > 1 && rec.min_eigen_gap < gap_tol) {
    throw NumericError(
        "eigenvalue collision: P(a4;x4,b) gap " + std::to_string(rec.min_eigen_gap) +
        " below tolerance; pick a different (a4,x4) or separate the types");
  }

  Eigen::MatrixXd a = bundle.l342 * pseudo_inverse(bundle.l32, pinv_rel_cutoff);
  Eigen::EigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) {
    throw NumericError("spectral_recover: eigendecomposition failed");
  }
  const auto& vals = eig.eigenvalues();
  const auto& vecs = eig.eigenvectors();

  rec.recovered_eigenvalues.assign(R, 0.0);
  rec.recovered_ccp.resize(rows, R);
  std::vector<bool> used(vals.size(), false);
  for (int r = 0; r < R; ++r) {
    Eigen::Index pick = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      if (used[i]) continue;
      double d = std::abs(vals(i) - std::complex<double>(bundle.d4(r), 0.0));
      if (d < best) {
        best = d;
        pick = i;
      }
    }
    if (pick < 0) throw NumericError("spectral_recover: no eigenpair available");
    used[pick] = true;
    rec.recovered_eigenvalues[r] = vals(pick).real();

    Eigen::VectorXd v = vecs.col(pick).real();
    double imag_norm = vecs.col(pick).imag().norm();
    if (imag_norm > 1e-8 * vecs.col(pick).norm()) {
      throw NumericError("spectral_recover: matched eigenvector is not real");
    }
    // True column sums to S (each x3 block of CCPs over a3 sums to 1), so
    // rescale the eigenvector to that total.
    const int S = static_cast<int>(bundle.lb2.cols());
    double total = v.sum();
    if (std::fabs(total) < 1e-300) {
      throw NumericError("spectral_recover: degenerate eigenvector scale");
    }
    rec.recovered_ccp.col(r) = v * (static_cast<double>(S) / total);
  }

  rec.max_ccp_error = (rec.recovered_ccp - bundle.l3b).cwiseAbs().maxCoeff();
  return rec;
}

}  // namespace ddc
