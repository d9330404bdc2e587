#pragma once

// Deterministic seeded random streams.
//
// Every stochastic draw in the simulator comes from a short-lived stream
// derived from (master seed, purpose, entity, epoch). Streams are therefore
// independent of evaluation order, thread count, and of which other draws
// happen in the same run: turning the trust layer on or off, or changing a
// solver parameter, never perturbs the generated world.

#include <cmath>
#include <cstdint>
#include <vector>

namespace swarm {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

namespace detail {

// splitmix64 finalizer (Steele, Lea, Flood; public domain reference code)
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t x = detail::mix64(master + kGoldenGamma * (purpose + 1));
  x = detail::mix64(x + kGoldenGamma * (a + 1));
  x = detail::mix64(x + kGoldenGamma * (b + 1));
  return x;
}

// splitmix64 sequence. Cheap to construct, so the simulator makes a fresh
// stream per (purpose, entity, epoch) instead of sharing long-lived state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return detail::mix64(state_);
  }

  // [0, 1) with 53-bit resolution
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Marsaglia polar method; avoids libm trig so sequences are stable across
  // platforms up to sqrt/log rounding.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // requires 0 < lo <= hi
  double log_uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // integer in [0, n); unbiased enough for simulation at 64-bit width
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // k distinct indices from {0, ..., n-1} via partial Fisher-Yates
  std::vector<int> sample(int n, int k) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    if (k > n) k = n;
    for (int i = 0; i < k; ++i) {
      const auto j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace swarm
