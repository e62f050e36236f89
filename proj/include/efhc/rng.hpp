#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>
#include <vector>

namespace efhc {

using Rng = std::mt19937_64;

// Independent stream keyed by an arbitrary tuple of integers (seed, device,
// purpose, ...). Identical keys give identical streams.
inline Rng make_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(key.size() * 2);
  for (auto k : key) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq s(words.begin(), words.end());
  return Rng(s);
}

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Stateless 64-bit mix (splitmix64 finalizer) for random-access draws.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double hash_uniform01(std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = 0x243f6a8885a308d3ull;
  for (auto k : key) h = mix64(h ^ k);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on uniform01, so draws do not depend on
// the library's normal_distribution.
inline double standard_normal(Rng& rng) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace efhc
