#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "distortion.hpp"
#include "keystream.hpp"
#include "trace.hpp"

// Off-path impersonator models. The attacker knows the true (undistorted)
// readings exactly but not the defender's key.

namespace microdistort {

enum class AttackKind {
    none,      // honest distorted stream reaches the detector
    eda,       // exact duplication of the undistorted readings
    rda,       // exact readings plus an attacker-chosen +/- epsilon per slot
    lsb_guess, // exact readings with every LSB set by a fair coin
};

constexpr std::string_view to_string(AttackKind k) noexcept
{
    switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::eda: return "eda";
    case AttackKind::rda: return "rda";
    case AttackKind::lsb_guess: return "lsb-guess";
    }
    return "?";
}

inline AttackKind parse_attack_kind(std::string_view text)
{
    if (text == "none") return AttackKind::none;
    if (text == "eda") return AttackKind::eda;
    if (text == "rda") return AttackKind::rda;
    if (text == "lsb-guess") return AttackKind::lsb_guess;
    throw std::invalid_argument("unknown attack kind '" + std::string(text) + "'");
}

/// Attacker coins are an ordinary keystream drawn from the attacker's own seed.
inline void fill_attacker_coins(std::uint64_t attacker_seed, std::span<std::uint8_t> out) noexcept
{
    fill_key_bits(derive_seed(attacker_seed, "attacker-coins"), out);
}

inline DistortedTrace attack_eda(const SensorTrace& original)
{
    return {original, 0.0, Scheme::forged};
}

inline DistortedTrace attack_rda(const SensorTrace& original, double epsilon,
                                 std::uint64_t attacker_seed)
{
    const std::int64_t eps = detail::epsilon_ticks(epsilon, original.resolution());
    std::vector<std::uint8_t> coins(original.size());
    fill_attacker_coins(attacker_seed, coins);
    std::vector<std::int64_t> out(original.size());
    apply_physical(original.ticks(), coins, eps, out);
    return {original.with_ticks(std::move(out)), epsilon, Scheme::forged};
}

inline DistortedTrace attack_lsb_guess(const SensorTrace& original, std::uint64_t attacker_seed)
{
    std::vector<std::uint8_t> coins(original.size());
    fill_attacker_coins(attacker_seed, coins);
    std::vector<std::int64_t> out(original.size());
    apply_lsb(original.ticks(), coins, out);
    return {original.with_ticks(std::move(out)), 0.0, Scheme::forged};
}

} // namespace microdistort
