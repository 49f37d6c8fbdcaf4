#include "ddc/simulate.hpp"

#include <cmath>

#include "ddc/error.hpp"
#include "ddc/rng.hpp"

namespace ddc {

int MixtureSpec::dim() const {
  if (components.empty()) return 0;
  if (const auto* tn = std::get_if<TruncatedNormal>(&components.front().family)) {
    return static_cast<int>(tn->mean.size());
  }
  return static_cast<int>(std::get<PointMass>(components.front().family).value.size());
}

void MixtureSpec::check() const {
  if (components.empty()) throw ConfigError("mixture: no components");
  double wsum = 0.0;
  const int d = dim();
  for (const auto& c : components) {
    if (!(c.weight >= 0.0)) throw ConfigError("mixture: negative weight");
    wsum += c.weight;
    if (const auto* tn = std::get_if<TruncatedNormal>(&c.family)) {
      if (static_cast<int>(tn->mean.size()) != d ||
          static_cast<int>(tn->sd.size()) != d) {
        throw ConfigError("mixture: component dimension mismatch");
      }
      if (!(tn->lo < tn->hi)) throw ConfigError("mixture: requires lo < hi");
      for (double s : tn->sd) {
        if (!(s > 0.0)) throw ConfigError("mixture: sd must be positive");
      }
    } else {
      const auto& pm = std::get<PointMass>(c.family);
      if (static_cast<int>(pm.value.size()) != d) {
        throw ConfigError("mixture: component dimension mismatch");
      }
    }
  }
  if (std::fabs(wsum - 1.0) > 1e-12) {
    throw ConfigError("mixture: weights must sum to 1");
  }
}

double MixtureSpec::cdf1(double b) const {
  double f = 0.0;
  for (const auto& c : components) {
    if (const auto* tn = std::get_if<TruncatedNormal>(&c.family)) {
      double mu = tn->mean.front();
      double sd = tn->sd.front();
      double plo = rng::normal_cdf((tn->lo - mu) / sd);
      double phi = rng::normal_cdf((tn->hi - mu) / sd);
      double p;
      if (b <= tn->lo) {
        p = 0.0;
      } else if (b >= tn->hi) {
        p = 1.0;
      } else {
        p = (rng::normal_cdf((b - mu) / sd) - plo) / (phi - plo);
      }
      f += c.weight * p;
    } else {
      const auto& pm = std::get<PointMass>(c.family);
      if (b >= pm.value.front()) f += c.weight;
    }
  }
  return f;
}

std::vector<double> MixtureSpec::knots1() const {
  std::vector<double> k;
  for (const auto& c : components) {
    if (const auto* tn = std::get_if<TruncatedNormal>(&c.family)) {
      k.push_back(tn->lo);
      k.push_back(tn->hi);
    } else {
      k.push_back(std::get<PointMass>(c.family).value.front());
    }
  }
  return k;
}

std::vector<std::vector<double>> draw_types(const MixtureSpec& mix, int n,
                                            std::uint64_t seed) {
  mix.check();
  if (n < 0) throw ConfigError("draw_types: n must be nonnegative");
  std::vector<double> weights;
  weights.reserve(mix.components.size());
  for (const auto& c : mix.components) weights.push_back(c.weight);

  const int d = mix.dim();
  std::vector<std::vector<double>> out(n);
  for (int i = 0; i < n; ++i) {
    rng::Stream stream(rng::derive_seed(seed, 1, static_cast<std::uint64_t>(i)));
    int k = stream.discrete(weights);
    const auto& c = mix.components[k];
    std::vector<double> b(d);
    if (const auto* tn = std::get_if<TruncatedNormal>(&c.family)) {
      for (int j = 0; j < d; ++j) {
        b[j] = stream.truncated_normal(tn->mean[j], tn->sd[j], tn->lo, tn->hi);
      }
    } else {
      b = std::get<PointMass>(c.family).value;
    }
    out[i] = std::move(b);
  }
  return out;
}

void Panel::check(const StateGrid& grid, int num_actions) const {
  if (static_cast<std::size_t>(n) * periods != state.size() ||
      state.size() != action.size()) {
    throw ConfigError("panel: ragged storage");
  }
  const int S = grid.size();
  for (std::size_t k = 0; k < state.size(); ++k) {
    if (state[k] < 0 || state[k] >= S) throw ConfigError("panel: state index out of range");
    if (action[k] < 0 || action[k] >= num_actions) {
      throw ConfigError("panel: action out of range");
    }
  }
}

Panel simulate_panel(const ModelSpec& spec, const StateGrid& grid,
                     const TransitionKernel& kernel, std::span<const double> gamma,
                     const std::vector<std::vector<double>>& betas, int periods,
                     std::span<const double> init_dist, std::uint64_t seed) {
  spec.check();
  if (periods < 1) throw ConfigError("simulate_panel: periods must be >= 1");
  if (spec.horizon.is_finite() && periods > spec.horizon.periods) {
    throw ConfigError("simulate_panel: periods exceed the finite horizon");
  }
  const int S = grid.size();
  std::vector<double> uniform_init;
  if (init_dist.empty()) {
    uniform_init.assign(S, 1.0 / S);
    init_dist = uniform_init;
  }
  if (static_cast<int>(init_dist.size()) != S) {
    throw ConfigError("simulate_panel: init_dist length does not match grid");
  }

  CcpCache cache(spec, grid, kernel);
  const int n = static_cast<int>(betas.size());
  Panel panel;
  panel.n = n;
  panel.periods = periods;
  panel.state.resize(static_cast<std::size_t>(n) * periods);
  panel.action.resize(static_cast<std::size_t>(n) * periods);

  PayoffParams params;
  params.gamma.assign(gamma.begin(), gamma.end());
  for (int i = 0; i < n; ++i) {
    params.beta = betas[i];
    const SolvedModel& solved = cache.get(params);
    rng::Stream stream(rng::derive_seed(seed, 2, static_cast<std::uint64_t>(i)));
    int s = stream.discrete(init_dist);
    for (int t = 0; t < periods; ++t) {
      const CcpTable& table = solved.ccp_at(t);
      int a = stream.discrete(
          {table.row(s), static_cast<std::size_t>(table.num_actions)});
      panel.state[static_cast<std::size_t>(i) * periods + t] = s;
      panel.action[static_cast<std::size_t>(i) * periods + t] = a;
      if (t + 1 < periods) {
        s = stream.discrete({kernel.row(a, s), static_cast<std::size_t>(S)});
      }
    }
  }
  return panel;
}

}  // namespace ddc
