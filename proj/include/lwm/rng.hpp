#pragma once

#include <cstdint>

namespace lwm::rng {

// Deterministic counter-based random streams.
//
// Every randomized path in the library draws from these primitives so that
// results are reproducible bit-for-bit across runs, platforms, and degrees
// of parallelism. The construction is the splitmix64 output function
// (Steele, Lea & Flood; the finalizer used by java.util.SplittableRandom)
// applied to `seed + (index + 1) * GAMMA`. Each (seed, index) pair maps to
// one 64-bit word independently of every other index, so streams can be
// evaluated out of order and in parallel.

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// Word `index` of the stream identified by `seed`.
constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed + (index + 1) * kGamma);
}

// Child stream seed for domain separation: derive(s, t1) and derive(s, t2)
// are unrelated streams for t1 != t2. Chained derives build seed trees,
// e.g. derive(derive(base, k), trial).
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ (mix64(tag + kGamma) + kGamma));
}

// Map a 64-bit word to the open interval (0, 1): take the top 53 bits and
// center within the lattice step so neither endpoint is reachable.
constexpr double to_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform draw in (0,1) at position `index` of stream `seed`.
constexpr double uniform_at(std::uint64_t seed, std::uint64_t index) {
    return to_unit(at(seed, index));
}

} // namespace lwm::rng
