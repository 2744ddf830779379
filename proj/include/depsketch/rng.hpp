#pragma once

#include <cstdint>
#include <random>
#include <thread>
#include <vector>
#include <functional>

namespace depsketch {

// splitmix64 finalizer, used to derive well-separated engine seeds from
// (seed, stream) pairs so trials can run on any worker in any order.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d4a2c479e38549ULL;
  return z ^ (z >> 31);
}

inline std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(substream(seed, stream));
}

// Runs fn(i) for i in [0, count). Each task must write only to its own
// slot so results are identical for any worker count.
inline void parallel_for(std::size_t count, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace depsketch
