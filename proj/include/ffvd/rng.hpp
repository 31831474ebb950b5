#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include "ffvd/kernel.hpp"

namespace ffvd {

/// Sequential stream for a single chain.
using Rng = std::mt19937_64;

/// SplitMix64 as a UniformRandomBitGenerator. Cheap to construct, so it backs
/// the counter-derived per-particle and per-sample streams.
class StreamRng {
 public:
  using result_type = std::uint64_t;
  explicit StreamRng(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

 private:
  std::uint64_t state_;
};

/// Mix a base seed with a path of counters (e.g. sweep, time step, particle).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

template <class Engine>
Vec standard_normal(Engine& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

}  // namespace ffvd
