#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace gait {

// SplitMix64 mixing step. Used to derive independent sub-seeds from one
// master seed so that pipeline stages never share an RNG stream.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_tag(const char* tag) {
  // FNV-1a, for domain separation of derived seeds
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = tag; *p; ++p) h = (h ^ static_cast<uint64_t>(*p)) * 0x100000001b3ULL;
  return h;
}

inline uint64_t derive_seed(uint64_t seed, const char* tag, std::initializer_list<uint64_t> path = {}) {
  uint64_t h = splitmix64(seed ^ hash_tag(tag));
  for (uint64_t v : path) h = splitmix64(h ^ v);
  return h;
}

// mt19937_64 has a standard-defined sequence; the transforms below avoid the
// implementation-defined std:: distributions so streams are stable everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n)
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // standard normal via Box-Muller (one draw per call)
  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gait
