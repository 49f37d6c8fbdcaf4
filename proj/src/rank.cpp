#include "ddc/rank.hpp"

#include <cmath>

#include "ddc/error.hpp"
#include "ddc/solver.hpp"

namespace ddc {

void DiscreteTypeSet::check() const {
  if (betas.empty() || betas.size() != weights.size()) {
    throw ConfigError("types: need matching beta and weight lists");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("types: weights must be strictly positive");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-12) throw ConfigError("types: weights must sum to 1");
}

Eigen::MatrixXd population_joint(const ModelSpec& spec, const StateGrid& grid,
                                 const TransitionKernel& kernel,
                                 std::span<const double> gamma,
                                 const DiscreteTypeSet& types, RankConditioning cond) {
  types.check();
  const int S = grid.size();
  const int A = spec.num_actions;
  if (cond.a1 < 0 || cond.a1 >= A || cond.a2 < 0 || cond.a2 >= A || cond.a3 < 0 ||
      cond.a3 >= A || cond.x1 < 0 || cond.x1 >= S) {
    throw ConfigError("rank: conditioning indices out of range");
  }

  CcpCache cache(spec, grid, kernel);
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(S, S);  // rows x3, cols x2
  PayoffParams params;
  params.gamma.assign(gamma.begin(), gamma.end());
  for (int r = 0; r < types.count(); ++r) {
    params.beta = types.betas[r];
    const CcpTable& P = cache.get(params).ccp_at(0);
    double base = types.weights[r] * P.at(cond.x1, cond.a1);
    for (int x2 = 0; x2 < S; ++x2) {
      double mid = base * kernel.at(cond.a1, cond.x1, x2) * P.at(x2, cond.a2);
      for (int x3 = 0; x3 < S; ++x3) {
        joint(x3, x2) += mid * kernel.at(cond.a2, x2, x3) * P.at(x3, cond.a3);
      }
    }
  }
  return joint;
}

Eigen::MatrixXd empirical_joint(const Panel& panel, int num_states,
                                RankConditioning cond, Eigen::MatrixXi& counts) {
  if (panel.periods < 3) {
    throw ConfigError("rank: sample mode needs at least 3 panel periods");
  }
  const int S = num_states;
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(S, S);
  counts = Eigen::MatrixXi::Zero(S, S);
  std::int64_t base = 0;  // individuals starting at x1
  for (int i = 0; i < panel.n; ++i) {
    if (panel.state_at(i, 0) != cond.x1) continue;
    base += 1;
    if (panel.action_at(i, 0) != cond.a1) continue;
    if (panel.action_at(i, 1) != cond.a2) continue;
    if (panel.action_at(i, 2) != cond.a3) continue;
    int x2 = panel.state_at(i, 1);
    int x3 = panel.state_at(i, 2);
    joint(x3, x2) += 1.0;
    counts(x3, x2) += 1;
  }
  if (base == 0) throw ConfigError("rank: no individuals start at the chosen x1");
  joint /= static_cast<double>(base);
  return joint;
}

RatioMatrix build_ratio_matrix(const Eigen::MatrixXd& joint,
                               const TransitionKernel& kernel, RankConditioning cond,
                               double floor, const Eigen::MatrixXi* counts,
                               int min_count) {
  const int S = kernel.num_states;
  if (joint.rows() != S || joint.cols() != S) {
    throw ConfigError("rank: joint matrix shape does not match the kernel");
  }

  Eigen::MatrixXd full(S, S);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> keep(S, S);
  std::vector<std::pair<int, int>> dropped;
  for (int x3 = 0; x3 < S; ++x3) {
    for (int x2 = 0; x2 < S; ++x2) {
      double d1 = kernel.at(cond.a1, cond.x1, x2);
      double d2 = kernel.at(cond.a2, x2, x3);
      bool ok = d1 > floor && d2 > floor;
      if (ok && counts != nullptr && (*counts)(x3, x2) < min_count) ok = false;
      keep(x3, x2) = ok;
      full(x3, x2) = ok ? joint(x3, x2) / (d2 * d1) : 0.0;
      if (!ok) dropped.emplace_back(x3, x2);
    }
  }

  RatioMatrix out;
  out.conditioning = cond;
  out.dropped = std::move(dropped);
  for (int x3 = 0; x3 < S; ++x3) {
    if (keep.row(x3).any()) out.x3_index.push_back(x3);
  }
  for (int x2 = 0; x2 < S; ++x2) {
    if (keep.col(x2).any()) out.x2_index.push_back(x2);
  }
  if (out.x3_index.empty() || out.x2_index.empty()) {
    throw NumericError("rank: every cell fell below the positivity floor");
  }
  out.m.resize(out.x3_index.size(), out.x2_index.size());
  for (std::size_t r = 0; r < out.x3_index.size(); ++r) {
    for (std::size_t c = 0; c < out.x2_index.size(); ++c) {
      out.m(r, c) = full(out.x3_index[r], out.x2_index[c]);
    }
  }
  return out;
}

RankEstimate estimate_rank(const RatioMatrix& matrix, double rel_threshold,
                           double abs_threshold) {
  if (matrix.m.size() == 0) throw ConfigError("rank: empty matrix");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix.m);
  RankEstimate est;
  const auto& sv = svd.singularValues();
  est.singular_values.assign(sv.data(), sv.data() + sv.size());
  if (est.singular_values.empty() || est.singular_values.front() <= 0.0) {
    est.rank = 0;
    return est;
  }
  double cut = abs_threshold > 0.0 ? abs_threshold
                                   : rel_threshold * est.singular_values.front();
  for (double s : est.singular_values) {
    if (s > cut) est.rank += 1;
  }
  return est;
}

}  // namespace ddc
