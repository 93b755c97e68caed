#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>

namespace crl {

// splitmix64 finalizer; drives substream seed derivation.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
  uint64_t h = mix64(master);
  for (uint64_t p : path) h = mix64(h ^ mix64(p));
  return h;
}

// Numbered substreams hanging off the one top-level seed. The tag values are
// part of the reproducibility contract; renumbering changes every trajectory.
namespace stream {
inline constexpr uint64_t kEnvEpisode = 1;
inline constexpr uint64_t kEnvPolicy = 2;
inline constexpr uint64_t kTrainInit = 3;
inline constexpr uint64_t kTrainStep = 4;
inline constexpr uint64_t kBench = 5;
inline constexpr uint64_t kVerify = 6;
}  // namespace stream

// mt19937_64 behind a fixed uniform-double mapping, so sampled trajectories
// do not depend on standard-library distribution internals.
struct Rng {
  std::mt19937_64 eng;

  Rng() : eng(0) {}
  explicit Rng(uint64_t seed) : eng(seed) {}

  static Rng substream(uint64_t master, std::initializer_list<uint64_t> path) {
    return Rng(derive_seed(master, path));
  }

  double uniform01() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }  // [0, 1)
  bool bernoulli(double p) { return uniform01() < p; }

  std::string save() const {
    std::ostringstream os;
    os << eng;
    return os.str();
  }
  void restore(const std::string& s) {
    std::istringstream is(s);
    is >> eng;
  }
};

}  // namespace crl
