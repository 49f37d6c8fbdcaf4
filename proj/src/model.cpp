#include "ddc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ddc/error.hpp"
#include "ddc/rng.hpp"

namespace ddc {

void ModelSpec::check() const {
  if (num_actions < 2) throw ConfigError("model: num_actions must be >= 2");
  if (state_dim < 1) throw ConfigError("model: state_dim must be >= 1");
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw ConfigError("model: discount must lie in [0,1)");
  }
  if (random_coef_count < 1) {
    throw ConfigError("model: random_coef_count must be >= 1");
  }
  if (random_coef_count % inside_actions() != 0) {
    throw ConfigError("model: random_coef_count must split evenly across actions");
  }
  if (beta_state_dims() < 0 || beta_state_dims() > state_dim) {
    throw ConfigError("model: beta block exceeds state dimension");
  }
  if (horizon.is_finite() && horizon.periods < 1) {
    throw ConfigError("model: finite horizon needs at least one period");
  }
}

StateGrid StateGrid::product(const std::vector<std::vector<double>>& axes) {
  if (axes.empty()) throw ConfigError("grid: no axes given");
  StateGrid g;
  g.dim = static_cast<int>(axes.size());
  std::size_t total = 1;
  for (const auto& ax : axes) {
    if (ax.empty()) throw ConfigError("grid: empty axis");
    total *= ax.size();
  }
  g.coords.reserve(total * axes.size());
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t s = 0; s < total; ++s) {
    for (std::size_t d = 0; d < axes.size(); ++d) g.coords.push_back(axes[d][idx[d]]);
    // odometer increment, last dimension fastest
    for (std::size_t d = axes.size(); d-- > 0;) {
      if (++idx[d] < axes[d].size()) break;
      idx[d] = 0;
    }
  }
  return g;
}

StateGrid StateGrid::from_points(int dim, std::vector<double> coords) {
  if (dim < 1 || coords.empty() || coords.size() % dim != 0) {
    throw ConfigError("grid: point list does not match dimension");
  }
  StateGrid g;
  g.dim = dim;
  g.coords = std::move(coords);
  return g;
}

int StateGrid::nearest(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim) {
    throw ConfigError("grid: query point has wrong dimension");
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const int S = size();
  for (int s = 0; s < S; ++s) {
    const double* p = coords.data() + static_cast<std::size_t>(s) * dim;
    double d = 0.0;
    for (int k = 0; k < dim; ++k) {
      double diff = p[k] - x[k];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = s;
    }
  }
  return best;
}

TransitionKernel TransitionKernel::zeros(int num_actions, int num_states) {
  TransitionKernel k;
  k.num_actions = num_actions;
  k.num_states = num_states;
  k.probs.assign(static_cast<std::size_t>(num_actions) * num_states * num_states, 0.0);
  return k;
}

TransitionKernel TransitionKernel::uniform(int num_actions, int num_states) {
  TransitionKernel k = zeros(num_actions, num_states);
  double p = 1.0 / num_states;
  for (auto& v : k.probs) v = p;
  return k;
}

TransitionKernel ar1_kernel(const StateGrid& grid, int num_actions,
                            double persistence, std::span<const double> noise_sd,
                            const std::vector<std::vector<double>>& drift) {
  const int S = grid.size();
  const int D = grid.dim;
  if (static_cast<int>(noise_sd.size()) != D) {
    throw ConfigError("ar1_kernel: noise_sd dimension mismatch");
  }
  if (static_cast<int>(drift.size()) != num_actions) {
    throw ConfigError("ar1_kernel: drift must list one vector per action");
  }
  for (const auto& d : drift) {
    if (static_cast<int>(d.size()) != D) {
      throw ConfigError("ar1_kernel: drift dimension mismatch");
    }
  }

  // Axis values and bounds per dimension (bins at midpoints between
  // neighbouring axis values, outer bins unbounded).
  std::vector<std::vector<double>> axes(D);
  for (int s = 0; s < S; ++s) {
    auto p = grid.point(s);
    for (int d = 0; d < D; ++d) {
      auto& ax = axes[d];
      bool found = false;
      for (double v : ax) {
        if (v == p[d]) {
          found = true;
          break;
        }
      }
      if (!found) ax.push_back(p[d]);
    }
  }
  for (auto& ax : axes) std::sort(ax.begin(), ax.end());

  std::vector<double> center(D);
  for (int d = 0; d < D; ++d) {
    center[d] = 0.5 * (axes[d].front() + axes[d].back());
  }

  auto axis_index = [&](int d, double v) {
    const auto& ax = axes[d];
    for (std::size_t i = 0; i < ax.size(); ++i) {
      if (ax[i] == v) return static_cast<int>(i);
    }
    throw NumericError("ar1_kernel: grid is not a product grid");
  };

  TransitionKernel k = TransitionKernel::zeros(num_actions, S);
  // Per-dimension bin probabilities, then product across dimensions.
  for (int a = 0; a < num_actions; ++a) {
    for (int from = 0; from < S; ++from) {
      auto x = grid.point(from);
      std::vector<std::vector<double>> binp(D);
      for (int d = 0; d < D; ++d) {
        const auto& ax = axes[d];
        double mean = center[d] + persistence * (x[d] - center[d]) + drift[a][d];
        binp[d].resize(ax.size());
        for (std::size_t i = 0; i < ax.size(); ++i) {
          double lo = (i == 0) ? -std::numeric_limits<double>::infinity()
                               : 0.5 * (ax[i - 1] + ax[i]);
          double hi = (i + 1 == ax.size()) ? std::numeric_limits<double>::infinity()
                                           : 0.5 * (ax[i] + ax[i + 1]);
          double plo = (lo == -std::numeric_limits<double>::infinity())
                           ? 0.0
                           : rng::normal_cdf((lo - mean) / noise_sd[d]);
          double phi = (hi == std::numeric_limits<double>::infinity())
                           ? 1.0
                           : rng::normal_cdf((hi - mean) / noise_sd[d]);
          binp[d][i] = phi - plo;
        }
      }
      double row_sum = 0.0;
      for (int to = 0; to < S; ++to) {
        auto y = grid.point(to);
        double p = 1.0;
        for (int d = 0; d < D; ++d) p *= binp[d][axis_index(d, y[d])];
        k.at(a, from, to) = p;
        row_sum += p;
      }
      for (int to = 0; to < S; ++to) k.at(a, from, to) /= row_sum;
    }
  }
  return k;
}

void PayoffParams::check(const ModelSpec& spec) const {
  spec.check();
  if (static_cast<int>(beta.size()) != spec.random_coef_count) {
    throw ConfigError("payoff: beta length does not match random_coef_count");
  }
  if (static_cast<int>(gamma.size()) != spec.gamma_size()) {
    throw ConfigError("payoff: gamma length does not match layout");
  }
}

double period_payoff(const ModelSpec& spec, const PayoffParams& params,
                     std::span<const double> x, int action) {
  if (static_cast<int>(x.size()) != spec.state_dim) {
    throw ConfigError("period_payoff: state has wrong dimension");
  }
  if (action < 0 || action >= spec.num_actions) {
    throw ConfigError("period_payoff: action out of range");
  }
  if (action == 0) return 0.0;

  const int cpa = spec.coefs_per_action();
  const int bsd = spec.beta_state_dims();
  const int gpa = spec.gamma_per_action();
  const double* b = params.beta.data() + static_cast<std::size_t>(action - 1) * cpa;
  const double* g = params.gamma.data() + static_cast<std::size_t>(action - 1) * gpa;

  double u = 0.0;
  int pos = 0;
  if (spec.intercept_mode) u += b[pos++];
  for (int d = 0; d < bsd; ++d) u += b[pos++] * x[d];
  for (int d = 0; d < gpa; ++d) u += g[d] * x[bsd + d];
  return u;
}

std::vector<double> payoff_table(const ModelSpec& spec, const PayoffParams& params,
                                 const StateGrid& grid) {
  params.check(spec);
  if (grid.dim != spec.state_dim) {
    throw ConfigError("payoff_table: grid dimension does not match model");
  }
  const int S = grid.size();
  const int A = spec.num_actions;
  std::vector<double> u(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      u[static_cast<std::size_t>(s) * A + a] = period_payoff(spec, params, grid.point(s), a);
    }
  }
  return u;
}

std::vector<Violation> validate(const ModelSpec& spec, const StateGrid& grid,
                                const TransitionKernel& kernel) {
  std::vector<Violation> out;
  auto add = [&](std::string code, int action, int i, int j, std::string msg) {
    out.push_back({std::move(code), action, i, j, std::move(msg)});
  };

  if (spec.num_actions < 2) add("num_actions", -1, -1, -1, "need at least 2 actions");
  if (!(spec.discount >= 0.0 && spec.discount < 1.0)) {
    add("discount", -1, -1, -1, "discount outside [0,1)");
  }
  if (spec.random_coef_count < 1 ||
      (spec.inside_actions() > 0 && spec.random_coef_count % spec.inside_actions() != 0)) {
    add("coef_layout", -1, -1, -1, "random_coef_count inconsistent with action count");
  } else if (spec.inside_actions() > 0 &&
             (spec.beta_state_dims() < 0 || spec.beta_state_dims() > spec.state_dim)) {
    add("coef_layout", -1, -1, -1, "beta block exceeds state dimension");
  }

  if (grid.dim != spec.state_dim) {
    add("grid_dim", -1, -1, -1, "grid dimension does not match state_dim");
  }
  if (grid.size() < 2) add("grid_size", -1, -1, -1, "grid needs at least 2 states");
  const int S = grid.size();
  for (int i = 0; i < S; ++i) {
    for (int j = i + 1; j < S; ++j) {
      auto a = grid.point(i);
      auto b = grid.point(j);
      bool same = true;
      for (int d = 0; d < grid.dim; ++d) {
        if (a[d] != b[d]) {
          same = false;
          break;
        }
      }
      if (same) add("duplicate_state", -1, i, j, "duplicate grid points");
    }
  }

  if (kernel.num_actions != spec.num_actions || kernel.num_states != S) {
    add("kernel_shape", -1, -1, -1, "kernel shape does not match model/grid");
    return out;
  }
  for (int a = 0; a < kernel.num_actions; ++a) {
    for (int from = 0; from < S; ++from) {
      double sum = 0.0;
      for (int to = 0; to < S; ++to) {
        double p = kernel.at(a, from, to);
        if (!(p >= 0.0)) add("negative_prob", a, from, to, "negative or NaN probability");
        sum += p;
      }
      if (std::fabs(sum - 1.0) > 1e-12) {
        add("row_sum", a, from, -1, "row does not sum to 1");
      }
    }
  }
  return out;
}

}  // namespace ddc
