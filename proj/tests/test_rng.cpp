#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ddc/rng.hpp"

using ddc::rng::derive_seed;
using ddc::rng::normal_cdf;
using ddc::rng::normal_quantile;
using ddc::rng::Stream;

TEST_CASE("derive_seed is deterministic and separates labels") {
  CHECK(derive_seed(42, 1, 7) == derive_seed(42, 1, 7));
  CHECK(derive_seed(42, 1, 7) != derive_seed(42, 2, 7));
  CHECK(derive_seed(42, 1, 7) != derive_seed(42, 1, 8));
  CHECK(derive_seed(42, 1, 7) != derive_seed(43, 1, 7));
  CHECK(derive_seed(0, 0, 0) != derive_seed(0, 0, 1));

  // No collisions over a block of nearby labels.
  std::vector<std::uint64_t> seen;
  for (std::uint64_t s1 = 0; s1 < 16; ++s1)
    for (std::uint64_t s2 = 0; s2 < 64; ++s2) seen.push_back(derive_seed(99, s1, s2));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("identical seeds give identical draw sequences") {
  Stream a(derive_seed(7, 2, 3));
  Stream b(derive_seed(7, 2, 3));
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.uniform() == b.uniform());
  }
  Stream c(derive_seed(7, 2, 3));
  Stream d(derive_seed(7, 2, 4));
  int differ = 0;
  for (int i = 0; i < 100; ++i) differ += c.uniform() != d.uniform();
  CHECK(differ > 90);
}

TEST_CASE("uniform stays in [0,1) and fills the interval") {
  Stream s(123);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 1e-3);
  CHECK(hi > 1.0 - 1e-3);
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal_quantile inverts normal_cdf") {
  for (double p : {1e-10, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1 - 1e-6}) {
    double z = normal_quantile(p);
    CHECK(normal_cdf(z) == doctest::Approx(p).epsilon(1e-12));
    CHECK(normal_quantile(normal_cdf(z)) == doctest::Approx(z).epsilon(1e-10));
  }
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1).epsilon(1e-15));
  // Known quantiles.
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-13));
}

TEST_CASE("truncated_normal respects its support") {
  Stream s(55);
  for (int i = 0; i < 20000; ++i) {
    double x = s.truncated_normal(2.5, 0.5, 0.0, 3.0);
    CHECK(x >= 0.0);
    CHECK(x <= 3.0);
  }
}

TEST_CASE("truncated_normal matches analytic moments") {
  // Closed-form mean of N(mu, sigma^2) truncated to [lo, hi]:
  //   mu + sigma * (phi(a) - phi(b)) / (Phi(b) - Phi(a)).
  auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
  double mu = 1.5, sigma = 1.0, lo = 0.0, hi = 50.0;
  double a = (lo - mu) / sigma, b = (hi - mu) / sigma;
  double z = normal_cdf(b) - normal_cdf(a);
  double truth = mu + sigma * (pdf(a) - pdf(b)) / z;

  Stream s(314);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = s.truncated_normal(mu, sigma, lo, hi);
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n;
  double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean - truth) < 4.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("unbounded normal has standard moments") {
  Stream s(2718);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = s.normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(double(n)));
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("discrete sampler follows the given weights") {
  Stream s(77);
  std::vector<double> probs = {0.1, 0.0, 0.55, 0.35};
  std::vector<int> counts(probs.size(), 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    int k = s.discrete(probs);
    REQUIRE(k >= 0);
    REQUIRE(k < int(probs.size()));
    ++counts[k];
  }
  CHECK(counts[1] == 0);
  for (std::size_t k = 0; k < probs.size(); ++k) {
    double se = std::sqrt(probs[k] * (1 - probs[k]) / n);
    CHECK(std::abs(double(counts[k]) / n - probs[k]) < 5 * se + 1e-12);
  }
}

TEST_CASE("discrete sampler handles a degenerate distribution") {
  Stream s(88);
  std::vector<double> probs = {0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) CHECK(s.discrete(probs) == 1);
}
