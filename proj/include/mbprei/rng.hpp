#pragma once

#include <cstdint>
#include <random>

namespace mbprei {

// splitmix64 finalizer; decorrelates seeds that differ in few bits.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream id -> generator seed.  Replicate r always draws from stream
// (master, r), so estimates do not depend on worker count or scheduling.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(mix64(master) ^ mix64(stream));
}

using RngStream = std::mt19937_64;

inline RngStream make_stream(std::uint64_t master, std::uint64_t stream) {
  return RngStream(derive_seed(master, stream));
}

// Reserved stream ids for setup draws (fixed environments, probes), kept
// far above any replicate index.
inline constexpr std::uint64_t kStreamEnvSetup = 0xA000000000000001ULL;
inline constexpr std::uint64_t kStreamImmigrationSetup = 0xA000000000000002ULL;
inline constexpr std::uint64_t kStreamHorizonProbe = 0xA000000000000003ULL;
inline constexpr std::uint64_t kStreamSubEstimate = 0xA000000000000004ULL;

inline double uniform01(RngStream& g) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

}  // namespace mbprei
