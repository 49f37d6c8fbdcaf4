#pragma once

#include <span>
#include <string>
#include <vector>

// Model definition: action set with an outside good (action 0, payoff
// normalized to zero), a finite state grid, per-action row-stochastic
// transitions, and linear payoffs u(x,a) = x'(beta_a, gamma_a) where beta_a
// are the individual's random coefficients and gamma_a is common across
// individuals. Coefficient layout per inside action: beta block first
// (intercept leading when intercept_mode), then gamma on the remaining state
// components. gamma vectors are stacked action 1, 2, ... in one array.

namespace ddc {

enum class HorizonKind { infinite, finite };

struct Horizon {
  HorizonKind kind = HorizonKind::infinite;
  int periods = 0;  // T1 when finite

  static Horizon infinite() { return {HorizonKind::infinite, 0}; }
  static Horizon finite(int t1) { return {HorizonKind::finite, t1}; }
  bool is_finite() const { return kind == HorizonKind::finite; }
};

struct ModelSpec {
  int num_actions = 2;  // includes action 0
  int state_dim = 1;
  double discount = 0.9;
  int random_coef_count = 1;  // total beta length across inside actions
  bool intercept_mode = false;
  Horizon horizon = Horizon::infinite();

  int inside_actions() const { return num_actions - 1; }
  int coefs_per_action() const { return random_coef_count / inside_actions(); }
  // State components multiplied by beta (excludes the intercept slot).
  int beta_state_dims() const {
    return coefs_per_action() - (intercept_mode ? 1 : 0);
  }
  int gamma_per_action() const { return state_dim - beta_state_dims(); }
  int gamma_size() const { return inside_actions() * gamma_per_action(); }

  // Throws ConfigError when the layout is inconsistent.
  void check() const;
};

struct StateGrid {
  int dim = 0;
  std::vector<double> coords;  // row-major, size() * dim

  static StateGrid product(const std::vector<std::vector<double>>& axes);
  static StateGrid from_points(int dim, std::vector<double> coords);

  int size() const { return dim > 0 ? static_cast<int>(coords.size()) / dim : 0; }
  std::span<const double> point(int s) const {
    return {coords.data() + static_cast<std::size_t>(s) * dim,
            static_cast<std::size_t>(dim)};
  }
  // Nearest grid index by Euclidean distance; lowest index wins ties.
  int nearest(std::span<const double> x) const;
};

struct TransitionKernel {
  int num_actions = 0;
  int num_states = 0;
  std::vector<double> probs;  // [a*S*S + from*S + to]

  static TransitionKernel zeros(int num_actions, int num_states);
  static TransitionKernel uniform(int num_actions, int num_states);

  const double* row(int a, int from) const {
    return probs.data() +
           (static_cast<std::size_t>(a) * num_states + from) * num_states;
  }
  double* row(int a, int from) {
    return probs.data() +
           (static_cast<std::size_t>(a) * num_states + from) * num_states;
  }
  double at(int a, int from, int to) const { return row(a, from)[to]; }
  double& at(int a, int from, int to) { return row(a, from)[to]; }
};

// Discretized AR(1)-style transition on a product grid: per dimension d,
// x'_d = center_d + persistence*(x_d - center_d) + drift[a][d] + N(0, noise_sd_d^2),
// integrated over nearest-grid-point bins along each axis.
TransitionKernel ar1_kernel(const StateGrid& grid, int num_actions,
                            double persistence, std::span<const double> noise_sd,
                            const std::vector<std::vector<double>>& drift);

struct PayoffParams {
  std::vector<double> gamma;  // stacked over inside actions
  std::vector<double> beta;   // one type's random coefficients

  void check(const ModelSpec& spec) const;
};

double period_payoff(const ModelSpec& spec, const PayoffParams& params,
                     std::span<const double> x, int action);

// u(x,a) for every state/action: [s*num_actions + a].
std::vector<double> payoff_table(const ModelSpec& spec, const PayoffParams& params,
                                 const StateGrid& grid);

struct Violation {
  std::string code;  // "row_sum", "negative_prob", "duplicate_state", ...
  int action = -1;
  int i = -1;
  int j = -1;
  std::string message;
};

std::vector<Violation> validate(const ModelSpec& spec, const StateGrid& grid,
                                const TransitionKernel& kernel);

}  // namespace ddc
