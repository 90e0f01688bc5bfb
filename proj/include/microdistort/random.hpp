#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

// Counter-based random primitives.
//
// Everything stochastic in the library derives from SplitMix64 evaluated at an
// explicit (seed, counter) pair. The output of word(seed, j) is exactly the
// j-th output of a SplitMix64 generator seeded with `seed`, so streams are
// stable across compilers, standard libraries and platforms, and any position
// can be addressed without generating its predecessors.
//
// None of this is cryptographically strong. It models a pre-shared pad for
// reproducible evaluation; it is not a key generator for deployment.

namespace microdistort {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// j-th SplitMix64 output for `seed`.
constexpr std::uint64_t counter_word(std::uint64_t seed, std::uint64_t j) noexcept
{
    return mix64(seed + (j + 1) * kGoldenGamma);
}

/// 64-bit FNV-1a over a label.
constexpr std::uint64_t fnv1a64(std::string_view label) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Derive an independent child seed from a parent seed, a label and an index.
/// Used for per-subcommand and per-trial seeds so that one master seed drives
/// a whole run.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t index = 0) noexcept
{
    std::uint64_t z = mix64(parent ^ fnv1a64(label));
    z = mix64(z + (index + 1) * kGoldenGamma);
    return mix64(z ^ 0xD6E8FEB86659FD93ULL);
}

/// Sequential view over a counter stream. Cheap to copy; each copy continues
/// independently from its own position.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed, std::uint64_t position = 0) noexcept
        : seed_(seed), position_(position)
    {
    }

    constexpr std::uint64_t next_u64() noexcept { return counter_word(seed_, position_++); }

    /// Uniform on [0, 1) with 53 bits of precision.
    constexpr double next_unit() noexcept
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform on [0, 1] (both endpoints reachable).
    constexpr double next_unit_closed() noexcept
    {
        return static_cast<double>(next_u64() >> 11) / static_cast<double>((1ULL << 53) - 1);
    }

    /// Unbiased integer in [0, bound). bound must be non-zero.
    std::uint64_t next_below(std::uint64_t bound) noexcept
    {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = next_u64();
        auto m = static_cast<unsigned __int128>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = next_u64();
                m = static_cast<unsigned __int128>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal deviate (Box-Muller, one output per call). Implemented
    /// here rather than via <random> distributions, whose outputs differ
    /// between standard library implementations.
    double next_gaussian() noexcept
    {
        double u1 = next_unit();
        while (u1 <= 0.0) {
            u1 = next_unit();
        }
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    constexpr std::uint64_t seed() const noexcept { return seed_; }
    constexpr std::uint64_t position() const noexcept { return position_; }

private:
    std::uint64_t seed_;
    std::uint64_t position_;
};

} // namespace microdistort
