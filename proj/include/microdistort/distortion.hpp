#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "keystream.hpp"
#include "trace.hpp"

namespace microdistort {

enum class Scheme {
    physical,          // d' = d + (2k - 1) * epsilon
    digital_lsb,       // LSB of the tick rewritten to the key bit
    digital_two_layer, // LSB rewritten to the sk1-selected bit of sk2 / sk3
    forged,            // produced by an attacker model
};

constexpr std::string_view to_string(Scheme s) noexcept
{
    switch (s) {
    case Scheme::physical: return "physical";
    case Scheme::digital_lsb: return "lsb";
    case Scheme::digital_two_layer: return "two-layer";
    case Scheme::forged: return "forged";
    }
    return "?";
}

/// Readings as observed by the detector, with the distortion that produced
/// them. `epsilon` is in physical units and is zero for the digital schemes.
/// Length, resolution, timestamps and gaps always match the source trace.
struct DistortedTrace {
    SensorTrace readings;
    double epsilon = 0.0;
    Scheme scheme = Scheme::physical;

    std::size_t size() const noexcept { return readings.size(); }
    std::span<const std::int64_t> ticks() const noexcept { return readings.ticks(); }
};

// Span kernels. These are what the evaluation harness calls per trial; the
// trace-level functions below validate and wrap them.

inline void apply_physical(std::span<const std::int64_t> ticks, std::span<const std::uint8_t> key,
                           std::int64_t epsilon_ticks, std::span<std::int64_t> out) noexcept
{
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        out[i] = ticks[i] + (2 * static_cast<std::int64_t>(key[i]) - 1) * epsilon_ticks;
    }
}

constexpr std::int64_t with_lsb(std::int64_t tick, std::uint8_t bit) noexcept
{
    return (tick & ~std::int64_t{1}) | static_cast<std::int64_t>(bit & 1U);
}

inline void apply_lsb(std::span<const std::int64_t> ticks, std::span<const std::uint8_t> key,
                      std::span<std::int64_t> out) noexcept
{
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        out[i] = with_lsb(ticks[i], key[i]);
    }
}

namespace detail {

inline void require_key(std::size_t key_length, std::size_t trace_length)
{
    if (key_length < trace_length) {
        throw KeyExhaustedError(key_length, trace_length);
    }
}

inline std::int64_t epsilon_ticks(double epsilon, double resolution)
{
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    return ticks_on_grid(epsilon, resolution, "epsilon");
}

} // namespace detail

inline DistortedTrace distort_physical(const SensorTrace& trace, const KeyStream& key,
                                       double epsilon)
{
    const std::int64_t eps = detail::epsilon_ticks(epsilon, trace.resolution());
    detail::require_key(key.length(), trace.size());
    std::vector<std::int64_t> out(trace.size());
    apply_physical(trace.ticks(), key.bits(), eps, out);
    return {trace.with_ticks(std::move(out)), epsilon, Scheme::physical};
}

inline DistortedTrace distort_digital_lsb(const SensorTrace& trace, const KeyStream& key)
{
    detail::require_key(key.length(), trace.size());
    std::vector<std::int64_t> out(trace.size());
    apply_lsb(trace.ticks(), key.bits(), out);
    return {trace.with_ticks(std::move(out)), 0.0, Scheme::digital_lsb};
}

inline DistortedTrace distort_digital_two_layer(const SensorTrace& trace, const TwoLayerKey& key)
{
    detail::require_key(key.length(), trace.size());
    std::vector<std::int64_t> out(trace.size());
    const auto t = trace.ticks();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = with_lsb(t[i], select_bit(key.sk1()[i], key.sk2()[i], key.sk3()[i]));
    }
    return {trace.with_ticks(std::move(out)), 0.0, Scheme::digital_two_layer};
}

/// Given the key, recover the undistorted trace from a physical distortion.
inline SensorTrace undo_physical(const DistortedTrace& distorted, const KeyStream& key)
{
    if (distorted.scheme != Scheme::physical) {
        throw std::invalid_argument("only physical distortion is invertible");
    }
    const std::int64_t eps =
        detail::epsilon_ticks(distorted.epsilon, distorted.readings.resolution());
    detail::require_key(key.length(), distorted.size());
    std::vector<std::int64_t> out(distorted.size());
    const auto t = distorted.ticks();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = t[i] - (2 * static_cast<std::int64_t>(key[i]) - 1) * eps;
    }
    return distorted.readings.with_ticks(std::move(out));
}

} // namespace microdistort
