#pragma once

#include <cstdint>
#include <random>

namespace spinjump {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Per-trajectory random stream. The engine seed is a mix of (seed, index),
// so trajectories are independent of execution order and thread count, and
// any (seed, index) pair reproduces the same draws on every platform.
class TrajectoryRng {
 public:
  TrajectoryRng(std::uint64_t seed, std::uint64_t trajectory_index)
      : engine_(splitmix64(splitmix64(seed) ^ (trajectory_index + 1))) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace spinjump
