#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "random.hpp"

namespace microdistort {

/// Write `out.size()` key bits for `seed`, starting at slot `offset`.
///
/// Bit i is bit (i mod 64), least significant first, of counter_word(seed,
/// i / 64). Any slot range can be produced independently, and a shorter stream
/// is always a prefix of a longer one with the same seed.
inline void fill_key_bits(std::uint64_t seed, std::span<std::uint8_t> out,
                          std::uint64_t offset = 0) noexcept
{
    std::size_t i = 0;
    std::uint64_t slot = offset;
    while (i < out.size()) {
        const std::uint64_t word = counter_word(seed, slot / 64);
        unsigned bit = static_cast<unsigned>(slot % 64);
        for (; bit < 64 && i < out.size(); ++bit, ++i, ++slot) {
            out[i] = static_cast<std::uint8_t>((word >> bit) & 1U);
        }
    }
}

/// Immutable binary secret sequence, one bit per trace slot. Slots align with
/// sample indices, not wall-clock time.
class KeyStream {
public:
    /// Stream from explicit bits (tests, fixtures, debugging). Has no seed.
    static KeyStream from_bits(std::vector<std::uint8_t> bits)
    {
        for (const auto b : bits) {
            if (b > 1) {
                throw std::invalid_argument("key bits must be 0 or 1");
            }
        }
        return KeyStream(std::nullopt, std::move(bits));
    }

    std::optional<std::uint64_t> seed() const noexcept { return seed_; }
    std::size_t length() const noexcept { return bits_.size(); }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    std::uint8_t operator[](std::size_t i) const noexcept { return bits_[i]; }

    std::uint8_t at(std::size_t i) const
    {
        if (i >= bits_.size()) {
            throw std::out_of_range("key slot " + std::to_string(i) + " out of range (length " +
                                    std::to_string(bits_.size()) + ")");
        }
        return bits_[i];
    }

    friend bool operator==(const KeyStream&, const KeyStream&) = default;

private:
    KeyStream(std::optional<std::uint64_t> seed, std::vector<std::uint8_t> bits)
        : seed_(seed), bits_(std::move(bits))
    {
    }

    friend KeyStream generate_keystream(std::uint64_t seed, std::size_t length);

    std::optional<std::uint64_t> seed_;
    std::vector<std::uint8_t> bits_;
};

inline KeyStream generate_keystream(std::uint64_t seed, std::size_t length)
{
    if (length == 0) {
        throw std::invalid_argument("keystream length must be at least 1");
    }
    std::vector<std::uint8_t> bits(length);
    fill_key_bits(seed, bits);
    return KeyStream(seed, std::move(bits));
}

/// Three equal-length streams for the two-layer digital scheme: sk1 selects,
/// per slot, whether sk2 (sk1 = 1) or sk3 (sk1 = 0) supplies the bit.
class TwoLayerKey {
public:
    TwoLayerKey(KeyStream selector, KeyStream when_one, KeyStream when_zero)
        : sk1_(std::move(selector)), sk2_(std::move(when_one)), sk3_(std::move(when_zero))
    {
        if (sk1_.length() != sk2_.length() || sk1_.length() != sk3_.length()) {
            throw std::invalid_argument("two-layer key streams must have equal length");
        }
        const auto s1 = sk1_.seed(), s2 = sk2_.seed(), s3 = sk3_.seed();
        if (s1 && s2 && s3 && (*s1 == *s2 || *s1 == *s3 || *s2 == *s3)) {
            throw std::invalid_argument("two-layer key streams must come from distinct seeds");
        }
    }

    static TwoLayerKey generate(std::uint64_t seed1, std::uint64_t seed2, std::uint64_t seed3,
                                std::size_t length)
    {
        return TwoLayerKey(generate_keystream(seed1, length), generate_keystream(seed2, length),
                           generate_keystream(seed3, length));
    }

    const KeyStream& sk1() const noexcept { return sk1_; }
    const KeyStream& sk2() const noexcept { return sk2_; }
    const KeyStream& sk3() const noexcept { return sk3_; }
    std::size_t length() const noexcept { return sk1_.length(); }

private:
    KeyStream sk1_;
    KeyStream sk2_;
    KeyStream sk3_;
};

constexpr std::uint8_t select_bit(std::uint8_t selector, std::uint8_t when_one,
                                  std::uint8_t when_zero) noexcept
{
    return selector != 0 ? when_one : when_zero;
}

inline std::uint8_t effective_bit(const TwoLayerKey& key, std::size_t i)
{
    if (i >= key.length()) {
        throw std::out_of_range("key slot " + std::to_string(i) + " out of range (length " +
                                std::to_string(key.length()) + ")");
    }
    return select_bit(key.sk1()[i], key.sk2()[i], key.sk3()[i]);
}

/// The single stream the two-layer scheme actually writes into the LSBs.
inline KeyStream effective_stream(const TwoLayerKey& key)
{
    std::vector<std::uint8_t> bits(key.length());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        bits[i] = select_bit(key.sk1()[i], key.sk2()[i], key.sk3()[i]);
    }
    return KeyStream::from_bits(std::move(bits));
}

/// Debug dump: bits packed eight to a byte, first slot in the most significant
/// position, lower-case hex on one line. A trailing partial byte is zero-padded.
inline std::string to_hex(const KeyStream& key)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve((key.length() + 7) / 8 * 2);
    for (std::size_t i = 0; i < key.length(); i += 8) {
        unsigned byte = 0;
        for (std::size_t j = 0; j < 8; ++j) {
            byte <<= 1;
            if (i + j < key.length()) {
                byte |= key[i + j];
            }
        }
        out.push_back(kDigits[byte >> 4]);
        out.push_back(kDigits[byte & 0xF]);
    }
    return out;
}

} // namespace microdistort
