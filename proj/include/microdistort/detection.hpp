#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "distortion.hpp"
#include "errors.hpp"
#include "keystream.hpp"
#include "trace.hpp"

// Detectors for keyed micro-distortion.
//
// Physical distortion shifts each reading by +eps (key bit 1) or -eps (key bit
// 0). Taking consecutive differences d'[i+1] - d'[i] cancels the shift unless
// the key changes between the two slots: a 0->1 transition (set S01) adds
// +2eps, a 1->0 transition (set S10) adds -2eps. The gauge
//
//     x = mean(delta' over S01) - mean(delta' over S10)
//
// therefore concentrates around 4eps for the honest sensor and around 0 for an
// impersonator that does not know the key. The filtered variant first drops
// differences with |delta'| > delta_th, removing abrupt process changes that
// would otherwise dominate the variance.
//
// All arithmetic runs on integer ticks. Means are compared against the band
// as exact rationals whenever the band lies on the tick grid, so honest
// constant traces produce x == 4eps exactly.

namespace microdistort {

enum class DetectorKind { simple, delta, filtered, lsb };

constexpr std::string_view to_string(DetectorKind k) noexcept
{
    switch (k) {
    case DetectorKind::simple: return "simple";
    case DetectorKind::delta: return "delta";
    case DetectorKind::filtered: return "filtered";
    case DetectorKind::lsb: return "lsb";
    }
    return "?";
}

inline DetectorKind parse_detector_kind(std::string_view text)
{
    if (text == "simple") return DetectorKind::simple;
    if (text == "delta") return DetectorKind::delta;
    if (text == "filtered") return DetectorKind::filtered;
    if (text == "lsb") return DetectorKind::lsb;
    throw std::invalid_argument("unknown detector '" + std::string(text) + "'");
}

enum class Reason { ok, band_violation, insufficient_evidence, lsb_mismatch };

constexpr std::string_view to_string(Reason r) noexcept
{
    switch (r) {
    case Reason::ok: return "ok";
    case Reason::band_violation: return "band-violation";
    case Reason::insufficient_evidence: return "insufficient-evidence";
    case Reason::lsb_mismatch: return "lsb-mismatch";
    }
    return "?";
}

/// Detector parameters in physical units. Unset fields take per-detector
/// defaults (see resolve_config).
struct DetectorConfig {
    double epsilon = 0.0;
    /// Filtration threshold; required by the filtered detector, ignored by the others.
    std::optional<double> delta_threshold;
    /// Minimum kept |S01| + |S10|. Default max(4, ceil((n - 1) / 8)).
    std::optional<std::size_t> min_evidence;
    /// Acceptance band for the gauge. Default [2eps, 6eps] for the delta
    /// detectors and [eps, 3eps] for the simple mean difference.
    std::optional<double> band_low;
    std::optional<double> band_high;
};

inline std::size_t default_min_evidence(std::size_t window) noexcept
{
    const std::size_t deltas = window > 0 ? window - 1 : 0;
    return std::max<std::size_t>(4, (deltas + 7) / 8);
}

/// Config converted to ticks for a given resolution and window length.
struct ResolvedConfig {
    std::int64_t epsilon = 0;
    /// Integer threshold: |delta| > threshold is filtered. For integer deltas
    /// this is equivalent to comparing against the real-valued threshold.
    std::int64_t threshold = std::numeric_limits<std::int64_t>::max();
    std::size_t min_evidence = 0;
    double band_low = 0.0;
    double band_high = 0.0;
};

inline ResolvedConfig resolve_config(const DetectorConfig& config, DetectorKind kind,
                                     std::size_t window, double resolution)
{
    ResolvedConfig r;
    if (kind == DetectorKind::lsb) {
        return r;
    }
    if (!(config.epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    r.epsilon = ticks_on_grid(config.epsilon, resolution, "epsilon");
    const double eps = static_cast<double>(r.epsilon);

    if (kind == DetectorKind::simple) {
        if (window < 2) {
            throw std::invalid_argument("simple mean difference needs a window of at least 2");
        }
        r.band_low = config.band_low ? ticks_snapped(*config.band_low, resolution) : eps;
        r.band_high = config.band_high ? ticks_snapped(*config.band_high, resolution) : 3 * eps;
        if (!(r.band_low < 2 * eps && 2 * eps < r.band_high)) {
            throw std::invalid_argument("band must satisfy low < 2*epsilon < high");
        }
        return r;
    }

    if (window < 3) {
        throw std::invalid_argument("delta detectors need a window of at least 3");
    }
    if (kind == DetectorKind::filtered) {
        if (!config.delta_threshold) {
            throw std::invalid_argument("filtered detector requires delta_threshold");
        }
        const double th = ticks_snapped(*config.delta_threshold, resolution);
        if (!(th > 2 * eps)) {
            throw std::invalid_argument("delta_threshold must exceed 2*epsilon");
        }
        if (std::isfinite(th)) {
            r.threshold = static_cast<std::int64_t>(std::floor(th));
        }
    }
    r.min_evidence = config.min_evidence.value_or(default_min_evidence(window));
    r.band_low = config.band_low ? ticks_snapped(*config.band_low, resolution) : 2 * eps;
    r.band_high = config.band_high ? ticks_snapped(*config.band_high, resolution) : 6 * eps;
    if (!(r.band_low < 4 * eps && 4 * eps < r.band_high)) {
        throw std::invalid_argument("band must satisfy low < 4*epsilon < high");
    }
    return r;
}

struct EvidenceCounts {
    std::size_t s00 = 0, s01 = 0, s10 = 0, s11 = 0; // kept deltas per key-pair set
    std::size_t filtered = 0;                       // deltas removed by |delta'| > delta_th
    std::size_t gaps = 0;                           // deltas skipped at trace gaps
    std::size_t ones = 0, zeros = 0;                // readings per key bit (simple)
    std::size_t checked = 0, mismatches = 0;        // LSB detector
};

struct DetectionVerdict {
    bool alarm = false;
    Reason reason = Reason::ok;
    /// Gauge in physical units: mu01 - mu10 (delta detectors) or mu1 - mu0
    /// (simple). Unset when a contributing set is empty.
    std::optional<double> x;
    std::optional<double> mu01, mu10;
    std::optional<double> mu1, mu0;
    EvidenceCounts counts;
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// Consecutive differences of the observed readings, in ticks.
struct DeltaSequence {
    std::vector<std::int64_t> deltas;
    std::vector<std::uint8_t> excluded; // 1 where the difference spans a gap
    double resolution = 1.0;

    std::size_t size() const noexcept { return deltas.size(); }
    double value(std::size_t i) const noexcept
    {
        return static_cast<double>(deltas[i]) * resolution;
    }
};

inline DeltaSequence delta_sequence(const SensorTrace& readings)
{
    if (readings.size() < 2) {
        throw std::invalid_argument("delta sequence needs at least two readings");
    }
    DeltaSequence seq;
    seq.resolution = readings.resolution();
    seq.deltas.resize(readings.size() - 1);
    seq.excluded.resize(readings.size() - 1);
    const auto t = readings.ticks();
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        seq.deltas[i] = t[i + 1] - t[i];
        seq.excluded[i] = readings.gap_before(i + 1) ? 1 : 0;
    }
    return seq;
}

inline DeltaSequence delta_sequence(const DistortedTrace& readings)
{
    return delta_sequence(readings.readings);
}

/// Delta positions grouped by the key-bit pair (k[i], k[i+1]).
struct Partition {
    std::vector<std::size_t> s00, s01, s10, s11;
};

/// `excluded`, when non-empty, has one flag per delta position (n - 1).
inline Partition partition(const KeyStream& key, std::size_t window,
                           std::span<const std::uint8_t> excluded = {})
{
    if (key.length() < window) {
        throw KeyExhaustedError(key.length(), window);
    }
    if (!excluded.empty() && excluded.size() + 1 != window) {
        throw std::invalid_argument("exclusion mask must have window - 1 entries");
    }
    Partition p;
    for (std::size_t i = 0; i + 1 < window; ++i) {
        if (!excluded.empty() && excluded[i] != 0) {
            continue;
        }
        const unsigned pair = key[i] * 2U + key[i + 1];
        switch (pair) {
        case 0: p.s00.push_back(i); break;
        case 1: p.s01.push_back(i); break;
        case 2: p.s10.push_back(i); break;
        default: p.s11.push_back(i); break;
        }
    }
    return p;
}

/// Per-set sums and counts of kept differences.
struct DeltaTally {
    std::array<std::int64_t, 4> sum{}; // indexed by 2*k[i] + k[i+1]
    std::array<std::size_t, 4> count{};
    std::size_t filtered = 0;
    std::size_t gaps = 0;
};

/// Single pass over a window: difference, filter, partition, accumulate.
/// `gap_before` is either empty or one flag per reading.
inline DeltaTally tally_deltas(std::span<const std::int64_t> ticks,
                               std::span<const std::uint8_t> gap_before,
                               std::span<const std::uint8_t> key, std::int64_t threshold) noexcept
{
    DeltaTally tally;
    const std::size_t n = ticks.size();
    if (n < 2) {
        return tally;
    }
    std::size_t considered = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!gap_before.empty() && gap_before[i + 1] != 0) {
            ++tally.gaps;
            continue;
        }
        ++considered;
        const std::int64_t d = ticks[i + 1] - ticks[i];
        const std::int64_t mag = d < 0 ? -d : d;
        const bool keep = mag <= threshold;
        const unsigned idx = key[i] * 2U + key[i + 1];
        tally.sum[idx] += keep ? d : 0;
        tally.count[idx] += keep ? 1 : 0;
    }
    const std::size_t kept = tally.count[0] + tally.count[1] + tally.count[2] + tally.count[3];
    tally.filtered = considered - kept;
    return tally;
}

namespace detail {

// Is num/den (den > 0) inside [low, high]? Exact when the bounds are integral.
inline bool ratio_in_band(__int128 num, __int128 den, double low, double high) noexcept
{
    auto below = [&](double bound) {
        if (std::nearbyint(bound) == bound && std::fabs(bound) < 9.0e18) {
            return num < static_cast<__int128>(bound) * den;
        }
        return static_cast<long double>(num) <
               static_cast<long double>(bound) * static_cast<long double>(den);
    };
    auto above = [&](double bound) {
        if (std::nearbyint(bound) == bound && std::fabs(bound) < 9.0e18) {
            return num > static_cast<__int128>(bound) * den;
        }
        return static_cast<long double>(num) >
               static_cast<long double>(bound) * static_cast<long double>(den);
    };
    return !below(low) && !above(high);
}

inline double ratio_units(__int128 num, __int128 den, double resolution) noexcept
{
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den)) *
           resolution;
}

} // namespace detail

/// Apply the evidence and band checks to a tally.
inline DetectionVerdict judge_delta_tally(const DeltaTally& tally, const ResolvedConfig& cfg,
                                          double resolution)
{
    DetectionVerdict v;
    v.counts.s00 = tally.count[0];
    v.counts.s01 = tally.count[1];
    v.counts.s10 = tally.count[2];
    v.counts.s11 = tally.count[3];
    v.counts.filtered = tally.filtered;
    v.counts.gaps = tally.gaps;

    const auto c01 = static_cast<__int128>(tally.count[1]);
    const auto c10 = static_cast<__int128>(tally.count[2]);
    const auto s01 = static_cast<__int128>(tally.sum[1]);
    const auto s10 = static_cast<__int128>(tally.sum[2]);
    if (c01 > 0) v.mu01 = detail::ratio_units(s01, c01, resolution);
    if (c10 > 0) v.mu10 = detail::ratio_units(s10, c10, resolution);

    if (c01 > 0 && c10 > 0) {
        const __int128 num = s01 * c10 - s10 * c01;
        const __int128 den = c01 * c10;
        v.x = detail::ratio_units(num, den, resolution);
        if (static_cast<std::size_t>(c01 + c10) < cfg.min_evidence) {
            v.alarm = true;
            v.reason = Reason::insufficient_evidence;
        } else if (!detail::ratio_in_band(num, den, cfg.band_low, cfg.band_high)) {
            v.alarm = true;
            v.reason = Reason::band_violation;
        }
        return v;
    }
    v.alarm = true;
    v.reason = Reason::insufficient_evidence;
    return v;
}

/// Sums of readings by key bit.
struct LevelTally {
    std::array<std::int64_t, 2> sum{};
    std::array<std::size_t, 2> count{};
};

inline LevelTally tally_levels(std::span<const std::int64_t> ticks,
                               std::span<const std::uint8_t> key) noexcept
{
    LevelTally t;
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        t.sum[key[i]] += ticks[i];
        t.count[key[i]] += 1;
    }
    return t;
}

inline DetectionVerdict judge_level_tally(const LevelTally& tally, const ResolvedConfig& cfg,
                                          double resolution)
{
    DetectionVerdict v;
    v.counts.zeros = tally.count[0];
    v.counts.ones = tally.count[1];
    const auto c0 = static_cast<__int128>(tally.count[0]);
    const auto c1 = static_cast<__int128>(tally.count[1]);
    const auto s0 = static_cast<__int128>(tally.sum[0]);
    const auto s1 = static_cast<__int128>(tally.sum[1]);
    if (c0 > 0) v.mu0 = detail::ratio_units(s0, c0, resolution);
    if (c1 > 0) v.mu1 = detail::ratio_units(s1, c1, resolution);
    if (c0 == 0 || c1 == 0) {
        v.alarm = true;
        v.reason = Reason::insufficient_evidence;
        return v;
    }
    const __int128 num = s1 * c0 - s0 * c1;
    const __int128 den = c0 * c1;
    v.x = detail::ratio_units(num, den, resolution);
    if (!detail::ratio_in_band(num, den, cfg.band_low, cfg.band_high)) {
        v.alarm = true;
        v.reason = Reason::band_violation;
    }
    return v;
}

inline DetectionVerdict judge_lsb(std::span<const std::int64_t> ticks,
                                  std::span<const std::uint8_t> key, std::size_t t) noexcept
{
    DetectionVerdict v;
    v.counts.checked = t;
    for (std::size_t i = 0; i < t; ++i) {
        if (static_cast<std::uint8_t>(ticks[i] & 1) != key[i]) {
            ++v.counts.mismatches;
        }
    }
    if (v.counts.mismatches > 0) {
        v.alarm = true;
        v.reason = Reason::lsb_mismatch;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Detectors over whole windows
// ---------------------------------------------------------------------------

inline DetectionVerdict detect_filtered_delta(const DistortedTrace& readings, const KeyStream& key,
                                              const DetectorConfig& config)
{
    const auto& r = readings.readings;
    const ResolvedConfig cfg =
        resolve_config(config, DetectorKind::filtered, r.size(), r.resolution());
    if (key.length() < r.size()) {
        throw KeyExhaustedError(key.length(), r.size());
    }
    return judge_delta_tally(tally_deltas(r.ticks(), r.gap_mask(), key.bits(), cfg.threshold),
                             cfg, r.resolution());
}

/// Delta mean difference without filtration (delta_th = +infinity).
inline DetectionVerdict detect_delta(const DistortedTrace& readings, const KeyStream& key,
                                     const DetectorConfig& config)
{
    const auto& r = readings.readings;
    const ResolvedConfig cfg =
        resolve_config(config, DetectorKind::delta, r.size(), r.resolution());
    if (key.length() < r.size()) {
        throw KeyExhaustedError(key.length(), r.size());
    }
    return judge_delta_tally(tally_deltas(r.ticks(), r.gap_mask(), key.bits(), cfg.threshold),
                             cfg, r.resolution());
}

/// Difference of the mean reading under key bit 1 and under key bit 0.
inline DetectionVerdict detect_simple_mean(const DistortedTrace& readings, const KeyStream& key,
                                           const DetectorConfig& config)
{
    const auto& r = readings.readings;
    const ResolvedConfig cfg =
        resolve_config(config, DetectorKind::simple, r.size(), r.resolution());
    if (key.length() < r.size()) {
        throw KeyExhaustedError(key.length(), r.size());
    }
    return judge_level_tally(tally_levels(r.ticks(), key.bits().first(r.size())), cfg,
                             r.resolution());
}

/// Alarm iff any of the first t readings carries an LSB other than the key bit.
inline DetectionVerdict detect_lsb(const DistortedTrace& readings, const KeyStream& key,
                                   std::size_t t)
{
    if (t > readings.size()) {
        throw std::invalid_argument("t exceeds the window length");
    }
    if (key.length() < t) {
        throw KeyExhaustedError(key.length(), t);
    }
    return judge_lsb(readings.ticks(), key.bits(), t);
}

inline DetectionVerdict detect_lsb(const DistortedTrace& readings, const TwoLayerKey& key,
                                   std::size_t t)
{
    if (t > readings.size()) {
        throw std::invalid_argument("t exceeds the window length");
    }
    if (key.length() < t) {
        throw KeyExhaustedError(key.length(), t);
    }
    std::vector<std::uint8_t> bits(t);
    for (std::size_t i = 0; i < t; ++i) {
        bits[i] = select_bit(key.sk1()[i], key.sk2()[i], key.sk3()[i]);
    }
    return judge_lsb(readings.ticks(), bits, t);
}

/// Dispatch by kind. The LSB detector checks the whole window.
inline DetectionVerdict detect(DetectorKind kind, const DistortedTrace& readings,
                               const KeyStream& key, const DetectorConfig& config)
{
    switch (kind) {
    case DetectorKind::simple: return detect_simple_mean(readings, key, config);
    case DetectorKind::delta: return detect_delta(readings, key, config);
    case DetectorKind::filtered: return detect_filtered_delta(readings, key, config);
    case DetectorKind::lsb: return detect_lsb(readings, key, readings.size());
    }
    throw std::invalid_argument("unknown detector");
}

/// Probability that an attacker guessing each key bit independently with
/// success probability p survives t checked slots.
inline double fn_bound_lsb(double p_guess, std::size_t t)
{
    if (!(p_guess >= 0.0 && p_guess <= 1.0)) {
        throw std::invalid_argument("probability must lie in [0, 1]");
    }
    return std::pow(p_guess, static_cast<double>(t));
}

} // namespace microdistort
