#include "ffvd/rng.hpp"

namespace ffvd {
namespace {

inline std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

StreamRng::result_type StreamRng::operator()() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix(state_);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix(base + 0x9e3779b97f4a7c15ULL);
  for (std::uint64_t c : path) h = mix(h ^ (c + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  return h;
}

}  // namespace ffvd
