#include <gtest/gtest.h>

#include <numeric>
#include <stdexcept>
#include <vector>

#include <microdistort/keystream.hpp>

using namespace microdistort;

namespace {

std::vector<std::uint8_t> bits_of(const KeyStream& k)
{
    return {k.bits().begin(), k.bits().end()};
}

} // namespace

// Expected bits below come from tests/oracles/keystream_oracle.py, an
// independent implementation of the documented stream layout.

TEST(Keystream, MatchesReferenceLayout)
{
    const std::vector<std::uint8_t> seed42{1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 1, 1, 0, 1, 1, 0};
    const std::vector<std::uint8_t> seed1{1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 0};
    const std::vector<std::uint8_t> seed2{0, 1, 1, 1, 0, 0, 1, 1, 0, 1, 1, 0, 1, 0, 1, 0};
    EXPECT_EQ(bits_of(generate_keystream(42, 16)), seed42);
    EXPECT_EQ(bits_of(generate_keystream(1, 16)), seed1);
    EXPECT_EQ(bits_of(generate_keystream(2, 16)), seed2);
}

TEST(Keystream, DeterministicInSeed)
{
    const auto a = generate_keystream(42, 5);
    const auto b = generate_keystream(42, 5);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.length(), 5u);
    EXPECT_EQ(a.seed(), 42u);
}

TEST(Keystream, DifferentSeedsDiffer)
{
    EXPECT_NE(bits_of(generate_keystream(1, 5)), bits_of(generate_keystream(2, 5)));
}

TEST(Keystream, MillionBitMean)
{
    const auto k = generate_keystream(42, 1'000'000);
    const auto ones = std::accumulate(k.bits().begin(), k.bits().end(), std::size_t{0});
    EXPECT_EQ(ones, 500076u); // oracle count
    const double mean = static_cast<double>(ones) / 1e6;
    EXPECT_GE(mean, 0.497);
    EXPECT_LE(mean, 0.503);
}

TEST(Keystream, ZeroLengthRejected)
{
    EXPECT_THROW(generate_keystream(1, 0), std::invalid_argument);
}

TEST(Keystream, PrefixProperty)
{
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL, 0xFFFFFFFFFFFFFFFFULL}) {
        for (std::size_t len : {1u, 63u, 64u, 65u, 200u}) {
            const auto shorter = generate_keystream(seed, len);
            const auto longer = generate_keystream(seed, len + 1);
            for (std::size_t i = 0; i < len; ++i) {
                ASSERT_EQ(shorter[i], longer[i]) << "seed " << seed << " len " << len;
            }
        }
    }
}

TEST(Keystream, OffsetFillMatchesFullStream)
{
    const auto full = generate_keystream(5, 300);
    std::vector<std::uint8_t> tail(100);
    fill_key_bits(5, tail, 137);
    for (std::size_t i = 0; i < tail.size(); ++i) {
        EXPECT_EQ(tail[i], full[137 + i]);
    }
}

TEST(Keystream, UnbiasedAcrossSeeds)
{
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const auto k = generate_keystream(seed, 20'000);
        const double mean =
            static_cast<double>(std::accumulate(k.bits().begin(), k.bits().end(), 0)) / 20'000.0;
        EXPECT_GE(mean, 0.47);
        EXPECT_LE(mean, 0.53);
    }
}

TEST(Keystream, FromBitsValidates)
{
    EXPECT_THROW(KeyStream::from_bits({0, 1, 2}), std::invalid_argument);
    const auto k = KeyStream::from_bits({1, 0});
    EXPECT_FALSE(k.seed().has_value());
    EXPECT_THROW((void)k.at(2), std::out_of_range);
}

TEST(Keystream, HexDumpMostSignificantFirst)
{
    // Oracle: seed 7, 20 bits = 11101011 10110000 0100 -> "ebb040".
    EXPECT_EQ(to_hex(generate_keystream(7, 20)), "ebb040");
    EXPECT_EQ(to_hex(KeyStream::from_bits({1})), "80");
    EXPECT_EQ(to_hex(KeyStream::from_bits({0, 0, 0, 0, 0, 0, 0, 1})), "01");
}

TEST(TwoLayerKey, EffectiveBitSelectsStream)
{
    // sk1 = 1 -> sk2 supplies the bit; sk1 = 0 -> sk3.
    const TwoLayerKey a(KeyStream::from_bits({1}), KeyStream::from_bits({0}),
                        KeyStream::from_bits({1}));
    EXPECT_EQ(effective_bit(a, 0), 0);
    const TwoLayerKey b(KeyStream::from_bits({0}), KeyStream::from_bits({0}),
                        KeyStream::from_bits({1}));
    EXPECT_EQ(effective_bit(b, 0), 1);
    EXPECT_THROW((void)effective_bit(b, 1), std::out_of_range);
}

TEST(TwoLayerKey, PureFunctionOfThreeBits)
{
    for (unsigned m = 0; m < 8; ++m) {
        const std::uint8_t s1 = m & 1, s2 = (m >> 1) & 1, s3 = (m >> 2) & 1;
        const TwoLayerKey k(KeyStream::from_bits({s1}), KeyStream::from_bits({s2}),
                            KeyStream::from_bits({s3}));
        EXPECT_EQ(effective_bit(k, 0), s1 ? s2 : s3);
    }
}

TEST(TwoLayerKey, IdenticalBranchesCollapse)
{
    const auto sk1 = generate_keystream(11, 500);
    const auto sk2 = generate_keystream(12, 500);
    const TwoLayerKey k(sk1, sk2, KeyStream::from_bits(bits_of(sk2)));
    for (std::size_t i = 0; i < 500; ++i) {
        EXPECT_EQ(effective_bit(k, i), sk2[i]);
    }
}

TEST(TwoLayerKey, ConstantSelectorPicksOneStream)
{
    const auto sk2 = generate_keystream(12, 300);
    const auto sk3 = generate_keystream(13, 300);
    const TwoLayerKey ones(KeyStream::from_bits(std::vector<std::uint8_t>(300, 1)), sk2, sk3);
    const TwoLayerKey zeros(KeyStream::from_bits(std::vector<std::uint8_t>(300, 0)), sk2, sk3);
    EXPECT_EQ(bits_of(effective_stream(ones)), bits_of(sk2));
    EXPECT_EQ(bits_of(effective_stream(zeros)), bits_of(sk3));
}

TEST(TwoLayerKey, RejectsMismatchedOrSharedSeeds)
{
    EXPECT_THROW(TwoLayerKey(generate_keystream(1, 4), generate_keystream(2, 4),
                             generate_keystream(3, 5)),
                 std::invalid_argument);
    EXPECT_THROW(TwoLayerKey::generate(1, 1, 3, 8), std::invalid_argument);
    EXPECT_NO_THROW(TwoLayerKey::generate(1, 2, 3, 8));
}

TEST(SeedDerivation, LabelsAndIndicesSeparateStreams)
{
    EXPECT_NE(derive_seed(7, "key", 0), derive_seed(7, "attacker", 0));
    EXPECT_NE(derive_seed(7, "key", 0), derive_seed(7, "key", 1));
    EXPECT_NE(derive_seed(7, "key", 0), derive_seed(8, "key", 0));
    EXPECT_EQ(derive_seed(7, "key", 3), derive_seed(7, "key", 3));
}

TEST(CounterRng, BoundedDrawsStayInRange)
{
    CounterRng rng(3);
    for (int i = 0; i < 10000; ++i) {
        EXPECT_LT(rng.next_below(7), 7u);
    }
    CounterRng u(4);
    for (int i = 0; i < 10000; ++i) {
        const double x = u.next_unit();
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
}
