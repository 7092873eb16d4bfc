#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace multimix {

using Rng = std::mt19937_64;

// splitmix64 step; used only to derive seeds for independent substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Substream tags. Every random consumer owns a stream keyed by
// (master seed, tag, a, b), so results do not depend on scheduling or on the
// number of workers.
enum class StreamTag : std::uint64_t {
  kSimulate = 1,
  kSmallEm = 2,
  kChain = 3,
  kSwap = 4,
  kChainPermutation = 5,
};

// Splitting rule: mix (tag, a, b) into the master seed with three rounds of
// splitmix64. Streams with distinct (tag, a, b) are treated as independent.
inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t st = master;
  std::uint64_t h = splitmix64(st);
  st ^= (static_cast<std::uint64_t>(tag) << 56) ^
        (a * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL) ^ (b << 1);
  h ^= splitmix64(st);
  st ^= h;
  return splitmix64(st);
}

inline Rng make_stream(std::uint64_t master, StreamTag tag, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  return Rng(derive_seed(master, tag, a, b));
}

inline double uniform01(Rng& g) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

inline int uniform_int(Rng& g, int lo, int hi) {  // inclusive bounds
  return std::uniform_int_distribution<int>(lo, hi)(g);
}

inline double normal01(Rng& g) {
  return std::normal_distribution<double>(0.0, 1.0)(g);
}

inline double gamma_draw(Rng& g, double shape, double scale = 1.0) {
  return std::gamma_distribution<double>(shape, scale)(g);
}

inline double beta_draw(Rng& g, double a, double b) {
  double x = gamma_draw(g, a);
  double y = gamma_draw(g, b);
  double s = x + y;
  return s > 0.0 ? x / s : 0.5;
}

// Fisher-Yates; std::shuffle is implementation-defined, this is pinned.
inline std::vector<int> random_permutation(Rng& g, int m) {
  std::vector<int> p(m);
  for (int i = 0; i < m; ++i) p[i] = i;
  for (int i = m - 1; i > 0; --i) {
    int j = uniform_int(g, 0, i);
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace multimix
