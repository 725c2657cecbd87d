#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace gmfg {

std::uint64_t splitmix64(std::uint64_t x);

enum class StreamTag : std::uint64_t { Common = 1, Agent = 2 };

/// Seed of the stream identified by (seed, path, tag, index). Each stream is
/// a pure function of its key, so any subset of paths or agents can be
/// regenerated independently of the others.
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t path, StreamTag tag, std::uint64_t index);

class NormalStream {
 public:
  explicit NormalStream(std::uint64_t key) : engine_(key) {}
  double next() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

/// Common-noise increments dW0 for one path: out.size() draws scaled by sqrt(dt).
void common_increments(std::uint64_t seed, std::uint64_t path, double dt, std::span<double> out);

}  // namespace gmfg
