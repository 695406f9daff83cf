#pragma once

#include <cstdint>
#include <random>

namespace fedsim {

using Rng = std::mt19937_64;

// SplitMix64 finalizer, used to derive independent substream seeds.
// Every consumer (population synthesis, participant selection, per-client
// shuffles, model init) owns its own generator seeded through here, so the
// draw order of one component never perturbs another.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t subseed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream));
}

inline std::uint64_t subseed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return subseed(subseed(seed, a), b);
}

inline std::uint64_t subseed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
  return subseed(subseed(seed, a, b), c);
}

// Substream tags.
namespace stream {
inline constexpr std::uint64_t counts = 0xC0;
inline constexpr std::uint64_t class_means = 0xC1;
inline constexpr std::uint64_t client_data = 0xC2;
inline constexpr std::uint64_t split = 0xC3;
inline constexpr std::uint64_t model_init = 0xC4;
inline constexpr std::uint64_t selection = 0xC5;
inline constexpr std::uint64_t local_shuffle = 0xC6;
}  // namespace stream

}  // namespace fedsim
