#include "ddc/mixture.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <string>

#include "ddc/error.hpp"
#include "ddc/kernels.hpp"
#include "ddc/threading.hpp"

namespace ddc {

int grid_rule(std::int64_t n) {
  if (n < 1) throw ConfigError("grid_rule: n must be >= 1");
  // Nudge guards against 4*n^(1/4) landing epsilon above an integer.
  return static_cast<int>(std::ceil(4.0 * std::pow(static_cast<double>(n), 0.25) - 1e-9));
}

double TypeLikelihoodMatrix::at(int i, int j) const { return std::exp(log_at(i, j)); }

TypeLikelihoodMatrix type_likelihood_matrix(const ModelSpec& spec,
                                            const StateGrid& grid,
                                            const TransitionKernel& kernel,
                                            std::span<const double> gamma,
                                            const std::vector<std::vector<double>>& points,
                                            const Panel& panel, double solver_tol,
                                            int solver_max_iter) {
  panel.check(grid, spec.num_actions);
  if (points.empty()) throw ConfigError("type_likelihood_matrix: no grid points");
  const int B = static_cast<int>(points.size());
  const int n = panel.n;

  TypeLikelihoodMatrix L;
  L.n = n;
  L.types = B;
  L.loglik.assign(static_cast<std::size_t>(n) * B, 0.0);

  parallel_for(B, [&](std::int64_t j) {
    PayoffParams params;
    params.gamma.assign(gamma.begin(), gamma.end());
    params.beta = points[j];
    SolvedModel solved;
    try {
      solved = solve_model(spec, params, grid, kernel, solver_tol, solver_max_iter);
    } catch (const Error& e) {
      throw ConvergenceError("type_likelihood_matrix: solve failed at grid point " +
                                 std::to_string(j) + ": " + e.what(),
                             0.0, 0);
    }
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int t = 0; t < panel.periods; ++t) {
        const CcpTable& table = solved.ccp_at(t);
        acc += std::log(table.at(panel.state_at(i, t), panel.action_at(i, t)));
      }
      L.loglik[static_cast<std::size_t>(i) * B + j] = acc;
    }
  });
  return L;
}

InnerSolveResult inner_weight_solve(const TypeLikelihoodMatrix& L,
                                    std::span<const int> cell_of, int cells,
                                    double tol, int max_iter,
                                    std::span<const double> init,
                                    std::span<const double> obs_mass) {
  const int n = L.n;
  const int B = L.types;
  if (cells < 1) throw ConfigError("inner_weight_solve: cells must be >= 1");
  if (!cell_of.empty() && static_cast<int>(cell_of.size()) != n) {
    throw ConfigError("inner_weight_solve: cell assignment length mismatch");
  }
  if (!obs_mass.empty() && static_cast<int>(obs_mass.size()) != n) {
    throw ConfigError("inner_weight_solve: obs_mass length mismatch");
  }

  // Max-shifted likelihood rows: ltil[i][j] = exp(log L_ij - m_i).
  std::vector<double> ltil(static_cast<std::size_t>(n) * B);
  std::vector<double> shift(n);
  for (int i = 0; i < n; ++i) {
    const double* lrow = L.loglik.data() + static_cast<std::size_t>(i) * B;
    double m = lrow[0];
    for (int j = 1; j < B; ++j) m = std::max(m, lrow[j]);
    if (!std::isfinite(m)) {
      throw NumericError("inner_weight_solve: non-finite likelihood row " +
                         std::to_string(i));
    }
    shift[i] = m;
    double* out = ltil.data() + static_cast<std::size_t>(i) * B;
    for (int j = 0; j < B; ++j) out[j] = std::exp(lrow[j] - m);
  }

  InnerSolveResult res;
  res.weights.assign(static_cast<std::size_t>(cells) * B, 1.0 / B);
  if (!init.empty()) {
    if (static_cast<int>(init.size()) != cells * B) {
      throw ConfigError("inner_weight_solve: init weight length mismatch");
    }
    std::copy(init.begin(), init.end(), res.weights.begin());
  }

  std::vector<double> cell_total(cells, 0.0);
  for (int i = 0; i < n; ++i) {
    int k = cell_of.empty() ? 0 : cell_of[i];
    if (k < 0 || k >= cells) throw ConfigError("inner_weight_solve: cell out of range");
    cell_total[k] += obs_mass.empty() ? 1.0 : obs_mass[i];
  }
  for (int k = 0; k < cells; ++k) {
    if (!(cell_total[k] > 0.0)) {
      throw ConfigError("inner_weight_solve: cell " + std::to_string(k) +
                        " has no observations");
    }
  }

  std::vector<double> acc(static_cast<std::size_t>(cells) * B);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      int k = cell_of.empty() ? 0 : cell_of[i];
      double mass = obs_mass.empty() ? 1.0 : obs_mass[i];
      const double* lrow = ltil.data() + static_cast<std::size_t>(i) * B;
      const double* wrow = res.weights.data() + static_cast<std::size_t>(k) * B;
      double* arow = acc.data() + static_cast<std::size_t>(k) * B;
      double s = kernels::posterior_accumulate(wrow, lrow, arow, B, mass);
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw NumericError("inner_weight_solve: vanishing mixture likelihood at row " +
                           std::to_string(i));
      }
      ll += mass * (std::log(s) + shift[i]);
    }
    res.objective_trace.push_back(ll);
    res.loglik = ll;

    double slack = 1e-9 + 1e-12 * std::fabs(prev_ll);
    if (it > 0 && ll < prev_ll - slack) {
      throw NumericError("inner_weight_solve: EM objective decreased");
    }
    if (it > 0 && ll - prev_ll <= tol * (1.0 + std::fabs(prev_ll))) {
      res.converged = true;
      return res;
    }
    prev_ll = ll;

    for (int k = 0; k < cells; ++k) {
      double* wrow = res.weights.data() + static_cast<std::size_t>(k) * B;
      const double* arow = acc.data() + static_cast<std::size_t>(k) * B;
      double total = 0.0;
      for (int j = 0; j < B; ++j) total += arow[j];
      if (!(total > 0.0)) {
        throw NumericError("inner_weight_solve: empty EM update for cell " +
                           std::to_string(k));
      }
      for (int j = 0; j < B; ++j) wrow[j] = arow[j] / total;
    }
    res.iterations = it + 1;
  }
  res.converged = false;
  return res;
}

ProfilePoint profile_objective(const ModelSpec& spec, const StateGrid& grid,
                               const TransitionKernel& kernel, const Panel& panel,
                               const std::vector<std::vector<double>>& points,
                               std::span<const double> gamma,
                               const EstimatorConfig& config) {
  TypeLikelihoodMatrix L = type_likelihood_matrix(spec, grid, kernel, gamma, points,
                                                  panel, config.solver_tol,
                                                  config.solver_max_iter);
  std::vector<int> cell_of;
  if (!config.cell_of_state.empty()) {
    if (static_cast<int>(config.cell_of_state.size()) != grid.size()) {
      throw ConfigError("estimator: cell_of_state length must equal grid size");
    }
    cell_of.resize(panel.n);
    for (int i = 0; i < panel.n; ++i) {
      int c = config.cell_of_state[panel.state_at(i, 0)];
      if (c < 0 || c >= config.cells) {
        throw ConfigError("estimator: cell_of_state entry out of range");
      }
      cell_of[i] = c;
    }
  }
  ProfilePoint p;
  p.inner = inner_weight_solve(L, cell_of, config.cells, config.em_tol,
                               config.em_max_iter);
  p.loglik = p.inner.loglik;
  return p;
}

namespace {

std::vector<std::vector<double>> sieve_points(const Panel& panel,
                                              const ModelSpec& spec,
                                              const EstimatorConfig& config) {
  if (!config.explicit_points.empty()) {
    for (const auto& p : config.explicit_points) {
      if (static_cast<int>(p.size()) != spec.random_coef_count) {
        throw ConfigError("estimator: explicit grid point has wrong dimension");
      }
    }
    return config.explicit_points;
  }
  if (spec.random_coef_count != 1) {
    throw ConfigError(
        "estimator: automatic grid placement covers scalar beta only; pass "
        "explicit_points for multi-dimensional types");
  }
  if (!(config.beta_lo < config.beta_hi)) {
    throw ConfigError("estimator: beta support must satisfy lo < hi");
  }
  int B = config.grid_points > 0 ? config.grid_points : grid_rule(panel.n);
  std::vector<std::vector<double>> points(B);
  for (int j = 0; j < B; ++j) {
    double frac = B == 1 ? 0.5 : static_cast<double>(j) / (B - 1);
    points[j] = {config.beta_lo + frac * (config.beta_hi - config.beta_lo)};
  }
  return points;
}

std::string gamma_key(std::span<const double> g) {
  std::string key(g.size() * sizeof(double), '\0');
  std::memcpy(key.data(), g.data(), key.size());
  return key;
}

}  // namespace

EstimateResult estimate(const Panel& panel, const StateGrid& grid,
                        const TransitionKernel& kernel_est, const ModelSpec& spec,
                        const EstimatorConfig& config) {
  auto start = std::chrono::steady_clock::now();
  spec.check();
  const int gdim = spec.gamma_size();
  if (static_cast<int>(config.gamma_lo.size()) != gdim ||
      static_cast<int>(config.gamma_hi.size()) != gdim) {
    throw ConfigError("estimator: gamma search box must match gamma dimension");
  }
  for (int d = 0; d < gdim; ++d) {
    if (!(config.gamma_lo[d] <= config.gamma_hi[d])) {
      throw ConfigError("estimator: gamma box must satisfy lo <= hi");
    }
  }

  std::vector<std::vector<double>> points = sieve_points(panel, spec, config);

  EstimateResult result;
  std::map<std::string, ProfilePoint> memo;
  auto eval = [&](const std::vector<double>& g) -> const ProfilePoint& {
    auto [it, inserted] = memo.try_emplace(gamma_key(g));
    if (inserted) {
      it->second = profile_objective(spec, grid, kernel_est, panel, points, g, config);
      result.profile_evals += 1;
      result.em_iterations += it->second.inner.iterations;
      result.trace.emplace_back(g, it->second.loglik);
    }
    return it->second;
  };

  std::vector<double> best_gamma;
  double best_ll = -std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<double>& g) {
    const ProfilePoint& p = eval(g);
    if (p.loglik > best_ll) {
      best_ll = p.loglik;
      best_gamma = g;
    }
    return p.loglik;
  };

  result.search_converged = true;
  if (gdim == 1) {
    // Golden-section search, maximizing.
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = config.gamma_lo[0], hi = config.gamma_hi[0];
    if (hi - lo <= config.gamma_tol) {
      consider({0.5 * (lo + hi)});
    } else {
      double x1 = hi - invphi * (hi - lo);
      double x2 = lo + invphi * (hi - lo);
      double f1 = consider({x1});
      double f2 = consider({x2});
      while (hi - lo > config.gamma_tol &&
             result.profile_evals < config.max_profile_evals) {
        if (f1 < f2) {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + invphi * (hi - lo);
          f2 = consider({x2});
        } else {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - invphi * (hi - lo);
          f1 = consider({x1});
        }
      }
      if (hi - lo > config.gamma_tol) result.search_converged = false;
    }
  } else {
    // Nelder-Mead on the box; candidates clamped inside.
    auto clamp = [&](std::vector<double> g) {
      for (int d = 0; d < gdim; ++d) {
        g[d] = std::min(std::max(g[d], config.gamma_lo[d]), config.gamma_hi[d]);
      }
      return g;
    };
    std::vector<std::vector<double>> simplex;
    std::vector<double> fvals;
    std::vector<double> center(gdim);
    for (int d = 0; d < gdim; ++d) {
      center[d] = 0.5 * (config.gamma_lo[d] + config.gamma_hi[d]);
    }
    simplex.push_back(center);
    for (int d = 0; d < gdim; ++d) {
      auto v = center;
      double step = 0.25 * (config.gamma_hi[d] - config.gamma_lo[d]);
      v[d] += step != 0.0 ? step : 0.25;
      simplex.push_back(clamp(v));
    }
    for (auto& v : simplex) fvals.push_back(consider(v));

    auto spread = [&] {
      double m = 0.0;
      for (std::size_t a = 1; a < simplex.size(); ++a) {
        for (int d = 0; d < gdim; ++d) {
          m = std::max(m, std::fabs(simplex[a][d] - simplex[0][d]));
        }
      }
      return m;
    };
    while (spread() > config.gamma_tol &&
           result.profile_evals < config.max_profile_evals) {
      // order descending (maximization: best first)
      std::vector<std::size_t> ord(simplex.size());
      for (std::size_t a = 0; a < ord.size(); ++a) ord[a] = a;
      std::sort(ord.begin(), ord.end(),
                [&](std::size_t a, std::size_t b) { return fvals[a] > fvals[b]; });
      std::vector<std::vector<double>> sx;
      std::vector<double> fv;
      for (auto a : ord) {
        sx.push_back(simplex[a]);
        fv.push_back(fvals[a]);
      }
      simplex = sx;
      fvals = fv;

      std::vector<double> centroid(gdim, 0.0);
      for (std::size_t a = 0; a + 1 < simplex.size(); ++a) {
        for (int d = 0; d < gdim; ++d) centroid[d] += simplex[a][d];
      }
      for (int d = 0; d < gdim; ++d) centroid[d] /= (simplex.size() - 1);

      auto& worst = simplex.back();
      auto blend = [&](double c) {
        std::vector<double> g(gdim);
        for (int d = 0; d < gdim; ++d) g[d] = centroid[d] + c * (centroid[d] - worst[d]);
        return clamp(g);
      };
      auto refl = blend(1.0);
      double frefl = consider(refl);
      if (frefl > fvals.front()) {
        auto expd = blend(2.0);
        double fexp = consider(expd);
        if (fexp > frefl) {
          worst = expd;
          fvals.back() = fexp;
        } else {
          worst = refl;
          fvals.back() = frefl;
        }
      } else if (frefl > fvals[fvals.size() - 2]) {
        worst = refl;
        fvals.back() = frefl;
      } else {
        auto contr = blend(-0.5);
        double fcon = consider(contr);
        if (fcon > fvals.back()) {
          worst = contr;
          fvals.back() = fcon;
        } else {
          for (std::size_t a = 1; a < simplex.size(); ++a) {
            for (int d = 0; d < gdim; ++d) {
              simplex[a][d] = 0.5 * (simplex[a][d] + simplex[0][d]);
            }
            simplex[a] = clamp(simplex[a]);
            fvals[a] = consider(simplex[a]);
          }
        }
      }
    }
    if (spread() > config.gamma_tol) result.search_converged = false;
  }

  // The returned point must dominate everything probed.
  for (const auto& [g, ll] : result.trace) {
    if (ll > best_ll + 1e-9 * (1.0 + std::fabs(best_ll))) {
      throw NumericError("estimate: search bookkeeping lost the best point");
    }
  }

  const ProfilePoint& best = eval(best_gamma);
  result.gamma = best_gamma;
  result.loglik = best.loglik;
  result.inner_residual =
      best.inner.objective_trace.size() > 1
          ? best.inner.objective_trace.back() -
                best.inner.objective_trace[best.inner.objective_trace.size() - 2]
          : 0.0;
  result.sieve.points = points;
  result.sieve.cells = config.cells;
  result.sieve.weights = best.inner.weights;

  std::vector<double> cell_mass(config.cells, 0.0);
  if (config.cells == 1 || config.cell_of_state.empty()) {
    cell_mass.assign(config.cells, 1.0 / config.cells);
  } else {
    for (int i = 0; i < panel.n; ++i) {
      cell_mass[config.cell_of_state[panel.state_at(i, 0)]] += 1.0 / panel.n;
    }
  }
  result.active_types = count_active_types(result.sieve, cell_mass,
                                           config.active_threshold);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double StepCdf::operator()(double b) const {
  auto it = std::upper_bound(at.begin(), at.end(), b);
  if (it == at.begin()) return 0.0;
  return cum[static_cast<std::size_t>(it - at.begin()) - 1];
}

StepCdf estimated_cdf(const SieveDistribution& sieve, int cell, int coord) {
  if (cell < 0 || cell >= sieve.cells) throw ConfigError("estimated_cdf: bad cell");
  const int B = sieve.size();
  std::vector<std::pair<double, double>> jumps(B);
  for (int j = 0; j < B; ++j) {
    if (coord < 0 || coord >= static_cast<int>(sieve.points[j].size())) {
      throw ConfigError("estimated_cdf: bad coordinate");
    }
    jumps[j] = {sieve.points[j][coord], sieve.weight(cell, j)};
  }
  std::sort(jumps.begin(), jumps.end());
  StepCdf cdf;
  double running = 0.0;
  for (const auto& [b, w] : jumps) {
    running += w;
    if (!cdf.at.empty() && cdf.at.back() == b) {
      cdf.cum.back() = running;
    } else {
      cdf.at.push_back(b);
      cdf.cum.push_back(running);
    }
  }
  return cdf;
}

namespace {

struct SegmentMetrics {
  double iae = 0.0;
  double ise = 0.0;
};

// Adaptive trapezoid on one knot-free segment; f must be continuous inside.
void adaptive_segment(const std::function<double(double)>& gap, double a, double b,
                      double fa, double fb, double tol, int depth, SegmentMetrics& out) {
  double mid = 0.5 * (a + b);
  double fm = gap(mid);
  double h = b - a;
  double iae1 = 0.5 * h * (std::fabs(fa) + std::fabs(fb));
  double iae2 = 0.25 * h * (std::fabs(fa) + 2.0 * std::fabs(fm) + std::fabs(fb));
  double ise1 = 0.5 * h * (fa * fa + fb * fb);
  double ise2 = 0.25 * h * (fa * fa + 2.0 * fm * fm + fb * fb);
  if (depth >= 52 ||
      (std::fabs(iae2 - iae1) <= tol && std::fabs(ise2 - ise1) <= tol)) {
    out.iae += iae2;
    out.ise += ise2;
    return;
  }
  adaptive_segment(gap, a, mid, fa, fm, 0.5 * tol, depth + 1, out);
  adaptive_segment(gap, mid, b, fm, fb, 0.5 * tol, depth + 1, out);
}

}  // namespace

ErrorMetrics error_metrics(const std::function<double(double)>& est,
                           std::span<const double> est_knots,
                           const std::function<double(double)>& truth,
                           std::span<const double> truth_knots, double lo, double hi,
                           double tol) {
  if (!(lo < hi)) throw ConfigError("error_metrics: requires lo < hi");
  std::vector<double> knots{lo, hi};
  for (double k : est_knots) {
    if (k > lo && k < hi) knots.push_back(k);
  }
  for (double k : truth_knots) {
    if (k > lo && k < hi) knots.push_back(k);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  // Step functions jump exactly at knots; evaluate strictly inside each
  // segment so the integrand stays continuous where the trapezoid samples it.
  const double nudge = 1e-12 * (hi - lo);
  SegmentMetrics total;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    double a = knots[k], b = knots[k + 1];
    if (b - a <= 2.0 * nudge) {
      double m = 0.5 * (a + b);
      double g = est(m) - truth(m);
      total.iae += std::fabs(g) * (b - a);
      total.ise += g * g * (b - a);
      continue;
    }
    auto gap = [&](double x) {
      double xc = std::min(std::max(x, a + nudge), b - nudge);
      return est(xc) - truth(xc);
    };
    double seg_tol = tol * (b - a) / (hi - lo);
    adaptive_segment(gap, a, b, gap(a), gap(b), seg_tol, 0, total);
  }
  return {total.iae, total.ise};
}

int count_active_types(const SieveDistribution& sieve, std::span<const double> cell_mass,
                       double threshold) {
  const int B = sieve.size();
  std::vector<double> uniform;
  if (cell_mass.empty()) {
    uniform.assign(sieve.cells, 1.0 / sieve.cells);
    cell_mass = uniform;
  }
  if (static_cast<int>(cell_mass.size()) != sieve.cells) {
    throw ConfigError("count_active_types: cell_mass length mismatch");
  }
  int active = 0;
  for (int j = 0; j < B; ++j) {
    double mass = 0.0;
    for (int k = 0; k < sieve.cells; ++k) mass += cell_mass[k] * sieve.weight(k, j);
    if (mass > threshold) ++active;
  }
  return active;
}

}  // namespace ddc
