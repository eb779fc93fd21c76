#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace rdl {

// FNV-1a over raw bytes. Used for content hashes (batches, datasets) and
// for deriving named RNG substreams.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic RNG behind every stochastic step: weight init, dropout,
// pair sampling, splits, augmentation, bootstrap. The engine is
// std::mt19937_64, whose raw output sequence is fixed by the C++ standard;
// the value transforms are implemented here because std:: distributions are
// not portable across standard libraries.
//
// Identify as Rng::kAlgorithm in run records so replays can be audited.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/canonical53";

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t raw() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling keeps every value exactly
  // equally likely.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = raw();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the spare deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Deterministic child stream for a named purpose. Forks depend only on
  // this generator's seed and the tag/indices, not on how many values have
  // been drawn, so adding a draw in one code path cannot shift another.
  Rng fork(std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0,
           std::uint64_t c = 0) const {
    std::uint64_t h = fnv1a64(tag);
    h = splitmix64(h ^ splitmix64(a + 0x9e3779b97f4a7c15ull));
    h = splitmix64(h ^ splitmix64(b + 0x7f4a7c159e3779b9ull));
    h = splitmix64(h ^ splitmix64(c + 0x2545f4914f6cdd1dull));
    return Rng(splitmix64(seed_ ^ h));
  }

  // Fisher-Yates; std::shuffle is not portable across standard libraries.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

  // k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(idx[i], idx[i + uniform_int(n - i)]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rdl
