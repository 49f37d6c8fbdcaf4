#include "ddc/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ddc/error.hpp"

namespace ddc::rng {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t s1,
                          std::uint64_t s2, std::uint64_t s3) {
  std::uint64_t state = master;
  std::uint64_t out = splitmix64_next(state);
  state ^= s1 + 0x9e3779b97f4a7c15ull;
  out ^= splitmix64_next(state);
  state ^= s2 + 0xd1b54a32d192ed03ull;
  out ^= splitmix64_next(state);
  state ^= s3 + 0x8ebc6af09c88c6e3ull;
  out ^= splitmix64_next(state);
  return out;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

namespace {

// Acklam's inverse normal CDF approximation.
double quantile_seed(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw NumericError("normal_quantile: p outside (0,1)");
  }
  double x = quantile_seed(p);
  // One Halley step against the exact CDF.
  static const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double e = normal_cdf(x) - p;
  double u = e / (inv_sqrt2pi * std::exp(-0.5 * x * x));
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double Stream::truncated_normal(double mu, double sigma, double lo, double hi) {
  if (!(sigma > 0.0) || !(lo < hi)) {
    throw ConfigError("truncated_normal: requires sigma > 0 and lo < hi");
  }
  double zlo = (lo - mu) / sigma;
  double zhi = (hi - mu) / sigma;
  double plo = normal_cdf(zlo);
  double phi = normal_cdf(zhi);
  double u = uniform();
  double p = plo + u * (phi - plo);
  constexpr double tiny = 0x1.0p-54;
  p = std::fmin(std::fmax(p, tiny), 1.0 - 1e-16);
  double z = normal_quantile(p);
  double x = mu + sigma * z;
  return std::fmin(std::fmax(x, lo), hi);
}

int Stream::discrete(std::span<const double> probs) {
  if (probs.empty()) throw ConfigError("discrete: empty probability vector");
  double u = uniform();
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] > 0.0) last_positive = static_cast<int>(k);
    cum += probs[k];
    if (u < cum) return static_cast<int>(k);
  }
  if (last_positive < 0) throw NumericError("discrete: all probabilities zero");
  return last_positive;
}

}  // namespace ddc::rng
