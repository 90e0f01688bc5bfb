#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <microdistort/attacker.hpp>
#include <microdistort/detection.hpp>

using namespace microdistort;

TEST(AttackEda, ReplaysOriginal)
{
    const SensorTrace d({5, 6, 7}, 1.0);
    const auto forged = attack_eda(d);
    EXPECT_EQ(forged.readings, d);
    EXPECT_EQ(forged.scheme, Scheme::forged);
}

TEST(AttackEda, DiffersFromHonestByEpsilonEverywhere)
{
    const auto d = synth_uniform(0, 100, 1000, 3, 1.0);
    const auto honest = distort_physical(d, generate_keystream(4, 1000), 1.0);
    const auto forged = attack_eda(d);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto diff = forged.ticks()[i] - honest.ticks()[i];
        EXPECT_TRUE(diff == 1 || diff == -1);
    }
}

TEST(AttackRda, TwoPointSupport)
{
    const auto forged = attack_rda(synth_constant(5, 1000, 1.0), 1.0, 11);
    for (const auto t : forged.ticks()) {
        EXPECT_TRUE(t == 4 || t == 6);
    }
}

TEST(AttackRda, FairCoin)
{
    const std::size_t n = 100'000;
    const auto forged = attack_rda(synth_constant(0, n, 1.0), 1.0, 12);
    std::size_t plus = 0;
    for (const auto t : forged.ticks()) {
        plus += t > 0 ? 1 : 0;
    }
    const double frac = static_cast<double>(plus) / n;
    EXPECT_GE(frac, 0.497);
    EXPECT_LE(frac, 0.503);
}

TEST(AttackRda, DeterministicInAttackerSeed)
{
    const auto d = synth_uniform(0, 100, 500, 1);
    EXPECT_EQ(attack_rda(d, 0.5, 3).readings, attack_rda(d, 0.5, 3).readings);
    EXPECT_NE(attack_rda(d, 0.5, 3).readings, attack_rda(d, 0.5, 4).readings);
    EXPECT_THROW((void)attack_rda(d, 0.005, 3), std::invalid_argument);
}

TEST(AttackRda, PartitionMeansCancel)
{
    const std::size_t n = 100'000;
    const double eps = 1.0;
    const auto forged = attack_rda(synth_constant(50, n, 1.0), eps, 99);
    const auto key = generate_keystream(2024, n);
    const auto seq = delta_sequence(forged);
    const auto p = partition(key, n);
    auto avg = [&](const std::vector<std::size_t>& idx) {
        double s = 0;
        for (const auto i : idx) {
            s += seq.value(i);
        }
        return s / static_cast<double>(idx.size());
    };
    EXPECT_LT(std::fabs(avg(p.s01) - avg(p.s10)), 0.1 * eps);
}

TEST(AttackRda, IndependentOfDefenderKey)
{
    const std::size_t n = 256;
    const auto key = generate_keystream(777, n);
    const auto base = synth_constant(0, n, 1.0);
    // Pooled Pearson correlation between forged sign bits and key bits over
    // 1000 attacker seeds.
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, count = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto forged = attack_rda(base, 1.0, seed);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = forged.ticks()[i] > 0 ? 1.0 : 0.0;
            const double y = key[i];
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
            count += 1;
        }
    }
    const double cov = sxy / count - (sx / count) * (sy / count);
    const double vx = sxx / count - (sx / count) * (sx / count);
    const double vy = syy / count - (sy / count) * (sy / count);
    const double r = cov / std::sqrt(vx * vy);
    EXPECT_GE(r, -0.1);
    EXPECT_LE(r, 0.1);
}

TEST(AttackLsbGuess, MatchRateAndHigherBits)
{
    const std::size_t n = 200'000;
    const auto d = synth_uniform(0, 1000, n, 5, 0.01);
    const auto key = generate_keystream(6, n);
    const auto forged = attack_lsb_guess(d, 7);
    std::size_t match = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = forged.ticks()[i] ^ d.ticks()[i];
        ASSERT_TRUE(x == 0 || x == 1);
        match += static_cast<std::uint8_t>(forged.ticks()[i] & 1) == key[i] ? 1 : 0;
    }
    const double rate = static_cast<double>(match) / n;
    EXPECT_NEAR(rate, 0.5, 0.005);
}

TEST(AttackKindNames, RoundTrip)
{
    for (const auto k : {AttackKind::none, AttackKind::eda, AttackKind::rda, AttackKind::lsb_guess}) {
        EXPECT_EQ(parse_attack_kind(to_string(k)), k);
    }
    EXPECT_THROW((void)parse_attack_kind("replay"), std::invalid_argument);
}
