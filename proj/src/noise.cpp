#include "gmfg/noise.hpp"

#include <cmath>

namespace gmfg {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t path, StreamTag tag, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ path);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  return splitmix64(h ^ index);
}

void common_increments(std::uint64_t seed, std::uint64_t path, double dt, std::span<double> out) {
  NormalStream s(stream_key(seed, path, StreamTag::Common, 0));
  const double scale = std::sqrt(dt);
  for (double& v : out) v = scale * s.next();
}

}  // namespace gmfg
