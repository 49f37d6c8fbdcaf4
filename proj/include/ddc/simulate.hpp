#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ddc/model.hpp"
#include "ddc/solver.hpp"

// Type draws and panel simulation. RNG streams are per individual, derived
// from (seed, label, i), so output is identical for any execution order.

namespace ddc {

struct TruncatedNormal {
  std::vector<double> mean;
  std::vector<double> sd;
  double lo = 0.0;
  double hi = 0.0;
};

struct PointMass {
  std::vector<double> value;
};

struct MixtureComponent {
  double weight = 0.0;
  std::variant<TruncatedNormal, PointMass> family;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;

  int dim() const;
  void check() const;  // weights sum to 1 within 1e-12, valid families
  // CDF of the first coordinate's marginal (mixtures used for scalar types).
  double cdf1(double b) const;
  // Kink/jump locations of cdf1: truncation bounds and point-mass positions.
  std::vector<double> knots1() const;
};

std::vector<std::vector<double>> draw_types(const MixtureSpec& mix, int n,
                                            std::uint64_t seed);

struct Panel {
  int n = 0;
  int periods = 0;
  std::vector<std::int32_t> state;   // grid index, [i*periods + t]
  std::vector<std::int32_t> action;  // [i*periods + t]

  int state_at(int i, int t) const {
    return state[static_cast<std::size_t>(i) * periods + t];
  }
  int action_at(int i, int t) const {
    return action[static_cast<std::size_t>(i) * periods + t];
  }
  void check(const StateGrid& grid, int num_actions) const;
};

// One beta vector per individual; gamma common. init_dist over grid states
// (empty = uniform). Solves per distinct beta via an internal cache.
Panel simulate_panel(const ModelSpec& spec, const StateGrid& grid,
                     const TransitionKernel& kernel, std::span<const double> gamma,
                     const std::vector<std::vector<double>>& betas, int periods,
                     std::span<const double> init_dist, std::uint64_t seed);

}  // namespace ddc
