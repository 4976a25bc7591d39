#pragma once

#include <cstdint>

namespace wadc {

// Counter-based seed split. Streams are fixed constants so adding a new
// consumer never shifts the seeds handed to existing ones.
enum class SeedStream : std::uint64_t {
  network_init = 1,
  train_episode = 2,
  env_reset = 3,
  evaluate = 4,
  calibrate = 5,
  simulate = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                    std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master ^ (static_cast<std::uint64_t>(stream) << 56)) + index);
}

}  // namespace wadc
