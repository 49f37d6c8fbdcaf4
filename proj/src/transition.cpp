#include "ddc/transition.hpp"

#include <cmath>

#include "ddc/error.hpp"

namespace ddc {

TransitionEstimate estimate_frequency(const Panel& panel, const StateGrid& grid,
                                      int num_actions) {
  panel.check(grid, num_actions);
  const int S = grid.size();
  TransitionEstimate est;
  est.method = TransitionMethod::frequency;
  est.kernel = TransitionKernel::zeros(num_actions, S);
  est.cell_counts.assign(static_cast<std::size_t>(num_actions) * S, 0);

  for (int i = 0; i < panel.n; ++i) {
    for (int t = 0; t + 1 < panel.periods; ++t) {
      int a = panel.action_at(i, t);
      int from = panel.state_at(i, t);
      int to = panel.state_at(i, t + 1);
      est.kernel.at(a, from, to) += 1.0;
      est.cell_counts[static_cast<std::size_t>(a) * S + from] += 1;
    }
  }

  for (int a = 0; a < num_actions; ++a) {
    for (int from = 0; from < S; ++from) {
      std::int64_t c = est.cell_counts[static_cast<std::size_t>(a) * S + from];
      double* row = est.kernel.row(a, from);
      if (c == 0) {
        for (int to = 0; to < S; ++to) row[to] = 1.0 / S;
        est.uniform_cells.emplace_back(a, from);
      } else {
        for (int to = 0; to < S; ++to) row[to] /= static_cast<double>(c);
      }
    }
  }
  return est;
}

namespace {

// Silverman's rule of thumb per dimension on the pooled from-state sample.
std::vector<double> silverman(const Panel& panel, const StateGrid& grid) {
  const int D = grid.dim;
  std::int64_t m = static_cast<std::int64_t>(panel.n) * (panel.periods - 1);
  if (m < 2) throw ConfigError("kernel density: need at least 2 transitions");
  std::vector<double> mean(D, 0.0), sq(D, 0.0);
  for (int i = 0; i < panel.n; ++i) {
    for (int t = 0; t + 1 < panel.periods; ++t) {
      auto x = grid.point(panel.state_at(i, t));
      for (int d = 0; d < D; ++d) {
        mean[d] += x[d];
        sq[d] += x[d] * x[d];
      }
    }
  }
  std::vector<double> h(D);
  double scale = std::pow(4.0 / ((D + 2.0) * static_cast<double>(m)), 1.0 / (D + 4.0));
  for (int d = 0; d < D; ++d) {
    mean[d] /= static_cast<double>(m);
    double var = sq[d] / static_cast<double>(m) - mean[d] * mean[d];
    double sd = var > 0.0 ? std::sqrt(var) : 0.0;
    if (sd <= 0.0) sd = 1.0;  // degenerate sample, fall back to unit scale
    h[d] = sd * scale;
  }
  return h;
}

inline double gauss_product(std::span<const double> x, std::span<const double> y,
                            std::span<const double> h) {
  double q = 0.0;
  for (std::size_t d = 0; d < h.size(); ++d) {
    double z = (x[d] - y[d]) / h[d];
    q += z * z;
  }
  return std::exp(-0.5 * q);
}

}  // namespace

TransitionEstimate estimate_kernel_density(const Panel& panel, const StateGrid& grid,
                                           int num_actions,
                                           std::span<const double> bandwidth_to,
                                           std::span<const double> bandwidth_from) {
  panel.check(grid, num_actions);
  const int S = grid.size();
  const int D = grid.dim;

  std::vector<double> h_default;
  if (bandwidth_to.empty() || bandwidth_from.empty()) {
    h_default = silverman(panel, grid);
  }
  std::vector<double> h_to(bandwidth_to.begin(), bandwidth_to.end());
  std::vector<double> h_from(bandwidth_from.begin(), bandwidth_from.end());
  if (h_to.empty()) h_to = h_default;
  if (h_from.empty()) h_from = h_default;
  if (static_cast<int>(h_to.size()) != D || static_cast<int>(h_from.size()) != D) {
    throw ConfigError("kernel density: bandwidth dimension mismatch");
  }
  for (double h : h_to) {
    if (!(h > 0.0)) throw ConfigError("kernel density: bandwidth must be positive");
  }
  for (double h : h_from) {
    if (!(h > 0.0)) throw ConfigError("kernel density: bandwidth must be positive");
  }

  TransitionEstimate est;
  est.method = TransitionMethod::kernel_density;
  est.kernel = TransitionKernel::zeros(num_actions, S);
  est.cell_counts.assign(static_cast<std::size_t>(num_actions) * S, 0);
  est.bandwidth_to = h_to;
  est.bandwidth_from = h_from;

  // Weighted counts per (a, from-point): kernel weight of observation's
  // from-state around the evaluation point, times kernel weight of its
  // to-state around each to-point.
  for (int a = 0; a < num_actions; ++a) {
    for (int from = 0; from < S; ++from) {
      auto xq = grid.point(from);
      double denom = 0.0;
      double* row = est.kernel.row(a, from);
      for (int i = 0; i < panel.n; ++i) {
        for (int t = 0; t + 1 < panel.periods; ++t) {
          if (panel.action_at(i, t) != a) continue;
          auto xi = grid.point(panel.state_at(i, t));
          double wq = gauss_product(xq, xi, h_from);
          denom += wq;
          auto xn = grid.point(panel.state_at(i, t + 1));
          for (int to = 0; to < S; ++to) {
            row[to] += wq * gauss_product(grid.point(to), xn, h_to);
          }
        }
      }
      if (denom <= 0.0) {
        for (int to = 0; to < S; ++to) row[to] = 1.0 / S;
        est.uniform_cells.emplace_back(a, from);
        continue;
      }
      double rowsum = 0.0;
      for (int to = 0; to < S; ++to) rowsum += row[to];
      if (rowsum <= 0.0) {
        for (int to = 0; to < S; ++to) row[to] = 1.0 / S;
        est.uniform_cells.emplace_back(a, from);
      } else {
        for (int to = 0; to < S; ++to) row[to] /= rowsum;
      }
    }
  }

  // Raw per-cell counts still reported for diagnostics.
  for (int i = 0; i < panel.n; ++i) {
    for (int t = 0; t + 1 < panel.periods; ++t) {
      est.cell_counts[static_cast<std::size_t>(panel.action_at(i, t)) * S +
                      panel.state_at(i, t)] += 1;
    }
  }
  return est;
}

}  // namespace ddc
