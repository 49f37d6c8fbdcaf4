#include "ddc/montecarlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ddc/error.hpp"
#include "ddc/rng.hpp"
#include "ddc/threading.hpp"
#include "ddc/transition.hpp"

namespace ddc {

McDesign McDesign::baseline() {
  McDesign d;
  d.spec.num_actions = 2;
  d.spec.state_dim = 2;
  d.spec.discount = 0.9;
  d.spec.random_coef_count = 1;
  d.spec.intercept_mode = false;

  auto linspace = [](double lo, double hi, int m) {
    std::vector<double> v(m);
    for (int i = 0; i < m; ++i) v[i] = lo + (hi - lo) * i / (m - 1);
    return v;
  };
  d.grid = StateGrid::product({linspace(0.0, 4.0, 5), linspace(0.0, 4.0, 3)});

  std::vector<double> noise{0.8, 0.8};
  d.kernel = ar1_kernel(d.grid, 2, 0.6, noise, {{0.0, 0.0}, {0.0, 0.5}});
  d.gamma = {0.5};

  auto tn = [](double mu, double sd) {
    TruncatedNormal t;
    t.mean = {mu};
    t.sd = {sd};
    t.lo = 0.0;
    t.hi = 50.0;
    return t;
  };
  d.mixture.components = {{1.0 / 3.0, tn(1.5, 1.0)},
                          {1.0 / 3.0, tn(2.5, 0.5)},
                          {1.0 / 3.0, tn(3.5, 1.0)}};
  d.periods = 8;
  return d;
}

void McConfig::check() const {
  if (replications < 1) throw ConfigError("montecarlo: replications must be >= 1");
  for (int n : sample_sizes) {
    if (n < 10) throw ConfigError("montecarlo: sample sizes must be >= 10");
  }
}

namespace {

McRep one_replication(const McDesign& design, const McConfig& config, int n,
                      std::uint64_t rep_seed) {
  auto start = std::chrono::steady_clock::now();
  McRep rep;
  try {
    auto betas = draw_types(design.mixture, n, rep_seed);
    Panel panel = simulate_panel(design.spec, design.grid, design.kernel,
                                 design.gamma, betas, design.periods,
                                 design.init_dist, rep_seed);

    const TransitionKernel* kernel = &design.kernel;
    TransitionEstimate est_kernel;
    if (!config.use_true_kernel) {
      est_kernel = estimate_frequency(panel, design.grid, design.spec.num_actions);
      kernel = &est_kernel.kernel;
    }

    EstimateResult est =
        estimate(panel, design.grid, *kernel, design.spec, config.estimator);

    StepCdf cdf = estimated_cdf(est.sieve, 0, 0);
    auto truth_knots = design.mixture.knots1();
    ErrorMetrics metrics = error_metrics(
        [&](double b) { return cdf(b); }, cdf.at,
        [&](double b) { return design.mixture.cdf1(b); }, truth_knots,
        config.estimator.beta_lo, config.estimator.beta_hi);

    rep.ok = true;
    rep.gamma_hat = est.gamma;
    rep.ise = metrics.ise;
    rep.iae = metrics.iae;
    rep.active_types = est.active_types;
  } catch (const std::exception& e) {
    rep.ok = false;
    rep.error = e.what();
  }
  rep.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace

McSummary run_monte_carlo(const McDesign& design, const McConfig& config) {
  config.check();
  design.spec.check();
  design.mixture.check();

  McSummary summary;
  for (int n : config.sample_sizes) {
    McCell cell;
    cell.n = n;
    cell.grid_points = config.estimator.grid_points > 0 ? config.estimator.grid_points
                                                        : grid_rule(n);
    cell.reps.resize(config.replications);
    parallel_for(config.replications, [&](std::int64_t m) {
      std::uint64_t rep_seed = rng::derive_seed(config.seed,
                                                static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(m));
      cell.reps[m] = one_replication(design, config, n, rep_seed);
    });

    const int gdim = static_cast<int>(design.gamma.size());
    std::vector<double> mean(gdim, 0.0);
    std::vector<double> iaes, ises, seconds;
    std::vector<int> actives;
    for (const auto& rep : cell.reps) {
      if (!rep.ok) {
        cell.failures += 1;
        continue;
      }
      cell.replications += 1;
      for (int d = 0; d < gdim; ++d) mean[d] += rep.gamma_hat[d];
      iaes.push_back(rep.iae);
      ises.push_back(rep.ise);
      actives.push_back(rep.active_types);
      seconds.push_back(rep.seconds);
    }
    if (cell.replications == 0) {
      throw NumericError("montecarlo: every replication failed at n = " +
                         std::to_string(n) + " (first error: " +
                         (cell.reps.empty() ? "none" : cell.reps.front().error) + ")");
    }
    const double M = static_cast<double>(cell.replications);
    for (int d = 0; d < gdim; ++d) mean[d] /= M;

    cell.bias.assign(gdim, 0.0);
    cell.variance.assign(gdim, 0.0);
    cell.mse.assign(gdim, 0.0);
    for (const auto& rep : cell.reps) {
      if (!rep.ok) continue;
      for (int d = 0; d < gdim; ++d) {
        double centered = rep.gamma_hat[d] - mean[d];
        double err = rep.gamma_hat[d] - design.gamma[d];
        cell.variance[d] += centered * centered / M;
        cell.mse[d] += err * err / M;
      }
    }
    for (int d = 0; d < gdim; ++d) {
      cell.bias[d] = mean[d] - design.gamma[d];
      cell.bias_scaled.push_back(cell.bias[d] * std::sqrt(static_cast<double>(n)));
      cell.variance_scaled.push_back(cell.variance[d] * n);
      cell.mse_scaled.push_back(cell.mse[d] * n);
    }

    auto mean_of = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / v.size();
    };
    cell.mise = mean_of(ises);
    cell.iae_mean = mean_of(iaes);
    cell.iae_min = *std::min_element(iaes.begin(), iaes.end());
    cell.iae_max = *std::max_element(iaes.begin(), iaes.end());
    double asum = 0.0;
    for (int a : actives) asum += a;
    cell.active_mean = asum / M;
    cell.active_min = *std::min_element(actives.begin(), actives.end());
    cell.active_max = *std::max_element(actives.begin(), actives.end());
    cell.seconds_mean = mean_of(seconds);
    std::vector<double> sorted = seconds;
    std::sort(sorted.begin(), sorted.end());
    cell.seconds_median = sorted.size() % 2 == 1
                              ? sorted[sorted.size() / 2]
                              : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                       sorted[sorted.size() / 2]);
    summary.cells.push_back(std::move(cell));
  }
  return summary;
}

}  // namespace ddc
