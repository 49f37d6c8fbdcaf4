#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ddc/model.hpp"
#include "ddc/simulate.hpp"

// First estimation step: recover the state transition from the panel. The
// frequency estimator is the grid MLE; the kernel-density estimator smooths
// transition pairs with Gaussian product kernels and evaluates on the grid.

namespace ddc {

enum class TransitionMethod { frequency, kernel_density };

struct TransitionEstimate {
  TransitionKernel kernel;
  std::vector<std::int64_t> cell_counts;            // [a*S + from]
  TransitionMethod method = TransitionMethod::frequency;
  std::vector<std::pair<int, int>> uniform_cells;   // (a, from) rows filled uniform
  std::vector<double> bandwidth_to, bandwidth_from; // kernel_density only

  std::int64_t count(int a, int from) const {
    return cell_counts[static_cast<std::size_t>(a) * kernel.num_states + from];
  }
};

TransitionEstimate estimate_frequency(const Panel& panel, const StateGrid& grid,
                                      int num_actions);

// Empty bandwidth spans select Silverman's rule per dimension from the pooled
// transition sample.
TransitionEstimate estimate_kernel_density(const Panel& panel, const StateGrid& grid,
                                           int num_actions,
                                           std::span<const double> bandwidth_to = {},
                                           std::span<const double> bandwidth_from = {});

}  // namespace ddc
