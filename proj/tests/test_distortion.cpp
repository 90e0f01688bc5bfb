#include <gtest/gtest.h>

#include <cstdlib>
#include <numeric>
#include <vector>

#include <microdistort/distortion.hpp>

using namespace microdistort;

namespace {

std::vector<std::int64_t> ticks_of(const DistortedTrace& t)
{
    return {t.ticks().begin(), t.ticks().end()};
}

} // namespace

TEST(DistortPhysical, PlusAndMinusEpsilon)
{
    const SensorTrace d({100}, 1.0, "W");
    EXPECT_EQ(distort_physical(d, KeyStream::from_bits({1}), 40.0).readings.value(0), 140.0);
    EXPECT_EQ(distort_physical(d, KeyStream::from_bits({0}), 40.0).readings.value(0), 60.0);
}

TEST(DistortPhysical, ConstantTrace)
{
    const auto out = distort_physical(SensorTrace({5, 5, 5, 5}, 1.0), KeyStream::from_bits({1, 0, 0, 1}), 1.0);
    EXPECT_EQ(ticks_of(out), (std::vector<std::int64_t>{6, 4, 4, 6}));
    EXPECT_EQ(out.scheme, Scheme::physical);
    EXPECT_EQ(out.epsilon, 1.0);
}

TEST(DistortPhysical, ExactMagnitudeAndInverse)
{
    const auto trace = synth_uniform(0, 1000, 5000, 1, 0.01);
    const auto key = generate_keystream(2, 5000);
    const auto out = distort_physical(trace, key, 0.5);
    ASSERT_EQ(out.size(), trace.size());
    EXPECT_EQ(out.readings.resolution(), trace.resolution());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        EXPECT_EQ(std::llabs(out.ticks()[i] - trace.ticks()[i]), 50);
    }
    EXPECT_EQ(undo_physical(out, key), trace);
}

TEST(DistortPhysical, ZeroMeanBound)
{
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const std::size_t n = 17 + seed * 13;
        const auto trace = synth_uniform(-10, 10, n, seed, 0.01);
        const auto key = generate_keystream(seed + 1000, n);
        const auto out = distort_physical(trace, key, 0.25);
        // Exact integer version of |mean(d') - mean(d)| <= eps * |#1 - #0| / n.
        const std::int64_t shift = std::accumulate(out.ticks().begin(), out.ticks().end(), std::int64_t{0}) -
                                   std::accumulate(trace.ticks().begin(), trace.ticks().end(), std::int64_t{0});
        const auto ones = static_cast<std::int64_t>(std::accumulate(key.bits().begin(), key.bits().end(), 0));
        const std::int64_t zeros = static_cast<std::int64_t>(n) - ones;
        EXPECT_EQ(shift, 25 * (ones - zeros));
    }
    // Balanced key: no shift at all.
    const auto trace = synth_uniform(0, 100, 6, 9);
    const auto out = distort_physical(trace, KeyStream::from_bits({1, 0, 1, 1, 0, 0}), 0.5);
    EXPECT_EQ(std::accumulate(out.ticks().begin(), out.ticks().end(), std::int64_t{0}),
              std::accumulate(trace.ticks().begin(), trace.ticks().end(), std::int64_t{0}));
}

TEST(DistortPhysical, NoClampingAtZero)
{
    const auto out = distort_physical(SensorTrace({0, 0}, 0.01), KeyStream::from_bits({0, 1}), 7.5);
    EXPECT_EQ(ticks_of(out), (std::vector<std::int64_t>{-750, 750}));
}

TEST(DistortPhysical, Errors)
{
    const SensorTrace t({1, 2, 3}, 0.01);
    EXPECT_THROW((void)distort_physical(t, KeyStream::from_bits({1, 0}), 0.5), KeyExhaustedError);
    EXPECT_THROW((void)distort_physical(t, KeyStream::from_bits({1, 0, 1}), 0.005), std::invalid_argument);
    EXPECT_THROW((void)distort_physical(t, KeyStream::from_bits({1, 0, 1}), 0.0), std::invalid_argument);
    EXPECT_THROW((void)distort_physical(t, KeyStream::from_bits({1, 0, 1}), -1.0), std::invalid_argument);
    try {
        (void)distort_physical(t, KeyStream::from_bits({1}), 0.5);
    } catch (const KeyExhaustedError& e) {
        EXPECT_EQ(e.key_length(), 1u);
        EXPECT_EQ(e.required(), 3u);
    }
}

TEST(DistortLsb, Examples)
{
    EXPECT_EQ(distort_digital_lsb(SensorTrace({0b1010}, 1.0), KeyStream::from_bits({1})).ticks()[0], 0b1011);
    EXPECT_EQ(distort_digital_lsb(SensorTrace({0b1011}, 1.0), KeyStream::from_bits({1})).ticks()[0], 0b1011);
    EXPECT_EQ(ticks_of(distort_digital_lsb(SensorTrace({4, 5, 6}, 1.0), KeyStream::from_bits({0, 0, 1}))),
              (std::vector<std::int64_t>{4, 4, 7}));
    // Negative ticks use two's complement: -3 is ...101, LSB 1.
    EXPECT_EQ(distort_digital_lsb(SensorTrace({-3}, 1.0), KeyStream::from_bits({0})).ticks()[0], -4);
}

TEST(DistortLsb, OnlyLowBitChanges)
{
    const auto trace = synth_uniform(-500, 500, 10000, 4, 0.001);
    const auto key = generate_keystream(5, 10000);
    const auto out = distort_digital_lsb(trace, key);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto x = out.ticks()[i] ^ trace.ticks()[i];
        EXPECT_TRUE(x == 0 || x == 1);
        EXPECT_EQ(out.ticks()[i] & 1, key[i]);
    }
    EXPECT_THROW((void)distort_digital_lsb(trace, generate_keystream(5, 9999)), KeyExhaustedError);
}

TEST(DistortTwoLayer, Examples)
{
    const TwoLayerKey k(KeyStream::from_bits({1}), KeyStream::from_bits({0}), KeyStream::from_bits({1}));
    EXPECT_EQ(distort_digital_two_layer(SensorTrace({0b111}, 1.0), k).ticks()[0], 0b110);
}

TEST(DistortTwoLayer, MatchesEffectiveStream)
{
    const auto trace = synth_uniform(0, 100, 3000, 8);
    const auto key = TwoLayerKey::generate(1, 2, 3, 3000);
    const auto two = distort_digital_two_layer(trace, key);
    EXPECT_EQ(ticks_of(two), ticks_of(distort_digital_lsb(trace, effective_stream(key))));
    EXPECT_EQ(two.scheme, Scheme::digital_two_layer);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto x = two.ticks()[i] ^ trace.ticks()[i];
        EXPECT_TRUE(x == 0 || x == 1);
    }
}

TEST(DistortTwoLayer, BranchCollapseAndSingleBranch)
{
    const auto trace = synth_uniform(0, 100, 500, 8);
    const auto sk1 = generate_keystream(1, 500);
    const auto sk2 = generate_keystream(2, 500);
    const auto sk3 = generate_keystream(3, 500);
    const auto sk2_copy = KeyStream::from_bits({sk2.bits().begin(), sk2.bits().end()});
    EXPECT_EQ(ticks_of(distort_digital_two_layer(trace, TwoLayerKey(sk1, sk2, sk2_copy))),
              ticks_of(distort_digital_lsb(trace, sk2)));
    const TwoLayerKey zeros(KeyStream::from_bits(std::vector<std::uint8_t>(500, 0)), sk2, sk3);
    EXPECT_EQ(ticks_of(distort_digital_two_layer(trace, zeros)), ticks_of(distort_digital_lsb(trace, sk3)));
}
