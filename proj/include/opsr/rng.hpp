#pragma once

// Deterministic random utilities. Everything that samples goes through this
// header so that results are reproducible for a fixed master seed regardless
// of platform or standard-library implementation (std::uniform_* and
// std::shuffle are implementation-defined, so we avoid them).

#include <cstdint>
#include <random>
#include <vector>
#include <stdexcept>

namespace opsr {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stateless seed derivation for spawning sub-seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t x = master ^ (stream * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  return splitmix64(x);
}

using Rng = std::mt19937_64;

// Derives an independent generator from a master seed and a list of stream
// identifiers (task index, repetition, phase, ...). The same ids always give
// the same stream.
inline Rng make_rng(std::uint64_t master_seed,
                    std::initializer_list<std::uint64_t> stream = {}) {
  std::uint64_t x = master_seed;
  std::uint64_t s = splitmix64(x);
  for (std::uint64_t id : stream) {
    x ^= id + 0x9e3779b97f4a7c15ULL + (x << 6) + (x >> 2);
    s ^= splitmix64(x);
  }
  return Rng(s);
}

// Uniform double in [0, 1) with 53 bits of entropy; portable and exact.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, n); unbiased enough for our purposes and portable.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n == 0");
  // Rejection sampling to remove modulo bias.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Samples an index from an (unnormalized is fine) nonnegative weight vector.
inline int sample_categorical(Rng& rng, const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;  // guard against rounding
}

// Fisher-Yates with our own index sampling, for reproducible shuffles.
template <typename T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace opsr
