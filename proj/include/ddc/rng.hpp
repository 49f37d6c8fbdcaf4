#pragma once

#include <cstdint>
#include <random>
#include <span>

// Deterministic random numbers. Every stream is a std::mt19937_64 (the bit
// sequence is fixed by the standard) seeded through splitmix64, and all
// non-uniform draws go through explicit inverse-CDF transforms so that the
// same seed yields the same bytes on every platform and thread count.
//
// Stream labels used across the library:
//   derive_seed(seed, 1, i)  type draw for individual i
//   derive_seed(seed, 2, i)  panel simulation for individual i
//   derive_seed(seed, n, m)  replication m of a Monte Carlo cell with sample size n

namespace ddc::rng {

constexpr std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t s1,
                          std::uint64_t s2 = 0, std::uint64_t s3 = 0);

// Standard normal CDF and its inverse (Acklam's rational approximation with
// one Halley refinement; accurate to ~1e-15 over (0,1)).
double normal_cdf(double z);
double normal_quantile(double p);

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0,1), 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double normal() { return truncated_normal(0.0, 1.0, -1e308, 1e308); }

  // Inverse-CDF sampling restricted to [lo, hi].
  double truncated_normal(double mu, double sigma, double lo, double hi);

  // Index into probs by cumulative scan of one uniform draw.
  int discrete(std::span<const double> probs);

 private:
  std::mt19937_64 eng_;
};

}  // namespace ddc::rng
