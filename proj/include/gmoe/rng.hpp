#pragma once

// Seed derivation for reproducible parallel sweeps.
//
// Every (model, n-index, rep-index) task gets its own stream seeded by
//   seed' = mix(mix(mix(mix(base) ^ model) ^ n_index) ^ rep_index)
// where mix is the SplitMix64 finalizer. Streams are std::mt19937_64, so
// results do not depend on which worker runs which task.

#include <cstdint>
#include <random>

namespace gmoe {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t model_id,
                                           std::uint64_t n_index, std::uint64_t rep_index) noexcept {
    std::uint64_t h = splitmix64(base);
    h = splitmix64(h ^ model_id);
    h = splitmix64(h ^ n_index);
    return splitmix64(h ^ rep_index);
}

/// Secondary stream from a task seed (e.g. sampling vs. initialization).
inline constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) noexcept {
    return splitmix64(seed ^ splitmix64(tag));
}

}  // namespace gmoe
