#pragma once

#include <cstdint>

namespace etchsim::rng {

// Stateless counter-based random source. Every draw is a pure function of
// its integer keys, so results are identical for any thread count, any
// evaluation order, and any platform with IEEE-754 doubles.

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer (Steele, Lea, Flood). Full 64-bit avalanche.
inline constexpr std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Feed one more key into a hash chain.
inline constexpr std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    return finalize(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

// Top 53 bits mapped to [0,1). Exact in double arithmetic.
inline constexpr double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline constexpr std::uint64_t hash2(std::uint64_t seed, std::uint64_t a) {
    return mix(finalize(seed ^ kGolden), a);
}

inline constexpr std::uint64_t hash3(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix(hash2(seed, a), b);
}

inline constexpr std::uint64_t hash4(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                     std::uint64_t c) {
    return mix(hash3(seed, a, b), c);
}

// draw(seed, step, site) and friends: uniform value in [0,1).
inline constexpr double draw(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return to_unit(hash3(seed, a, b));
}

inline constexpr double draw(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
    return to_unit(hash4(seed, a, b, c));
}

// Role tags keep independent random streams from colliding when they share
// a user seed (engine removal draws, GA operators, tolerance sampling).
namespace role {
inline constexpr std::uint64_t kEtch = 0x45544348ull;        // "ETCH"
inline constexpr std::uint64_t kGaInit = 0x4741494eull;      // "GAIN"
inline constexpr std::uint64_t kGaCross = 0x47414352ull;     // "GACR"
inline constexpr std::uint64_t kGaMutate = 0x47414d55ull;    // "GAMU"
inline constexpr std::uint64_t kGaTourney = 0x4741544full;   // "GATO"
inline constexpr std::uint64_t kTolParam = 0x544f4c50ull;    // "TOLP"
inline constexpr std::uint64_t kTolSeed = 0x544f4c53ull;     // "TOLS"
}  // namespace role

}  // namespace etchsim::rng
