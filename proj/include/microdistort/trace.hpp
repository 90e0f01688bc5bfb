#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace microdistort {

/// Round-half-to-even of value / resolution onto the integer tick grid.
inline std::int64_t quantize(double value, double resolution)
{
    const double q = std::nearbyint(value / resolution);
    if (!std::isfinite(q) || std::fabs(q) > 9.0e18) {
        throw std::invalid_argument("value out of fixed-point range");
    }
    return static_cast<std::int64_t>(q);
}

/// Exact tick count for a magnitude that must already lie on the grid (an
/// epsilon, a step). Accepts representation error of ~1e-9 relative.
inline std::int64_t ticks_on_grid(double units, double resolution, const char* what)
{
    const double q = units / resolution;
    const double r = std::nearbyint(q);
    if (!std::isfinite(q) || std::fabs(q - r) > 1e-9 * std::max(1.0, std::fabs(r))) {
        throw std::invalid_argument(std::string(what) + " is not a multiple of the resolution");
    }
    return static_cast<std::int64_t>(r);
}

/// Like ticks_on_grid but tolerates off-grid values; snaps only when the value
/// is within representation error of a grid point.
inline double ticks_snapped(double units, double resolution)
{
    const double q = units / resolution;
    if (!std::isfinite(q)) {
        return q;
    }
    const double r = std::nearbyint(q);
    return std::fabs(q - r) <= 1e-9 * std::max(1.0, std::fabs(r)) ? r : q;
}

/// Quantized sensor readings. Values are stored as integer ticks; the physical
/// value of tick t is t * resolution.
///
/// `gap_before(i)` marks a discontinuity between samples i-1 and i (a missing
/// timestamp span, or a boundary introduced by clock windowing). Differences
/// are never taken across a gap.
class SensorTrace {
public:
    SensorTrace(std::vector<std::int64_t> ticks, double resolution, std::string unit = "units",
                double sample_interval = 1.0,
                std::optional<std::vector<std::int64_t>> timestamps = std::nullopt,
                std::vector<std::uint8_t> gap_before = {})
        : ticks_(std::move(ticks)), resolution_(resolution), unit_(std::move(unit)),
          sample_interval_(sample_interval), timestamps_(std::move(timestamps)),
          gaps_(std::move(gap_before))
    {
        if (ticks_.empty()) {
            throw std::invalid_argument("trace must contain at least one value");
        }
        if (!(resolution_ > 0.0) || !std::isfinite(resolution_)) {
            throw std::invalid_argument("resolution must be positive");
        }
        if (!(sample_interval_ > 0.0) || !std::isfinite(sample_interval_)) {
            throw std::invalid_argument("sample interval must be positive");
        }
        if (timestamps_ && timestamps_->size() != ticks_.size()) {
            throw std::invalid_argument("timestamp count does not match value count");
        }
        if (!gaps_.empty()) {
            if (gaps_.size() != ticks_.size()) {
                throw std::invalid_argument("gap mask size does not match value count");
            }
            gaps_[0] = 0;
            if (std::none_of(gaps_.begin(), gaps_.end(), [](auto g) { return g != 0; })) {
                gaps_.clear();
            }
        }
    }

    /// Quantize physical values onto the grid (round half to even).
    static SensorTrace from_units(std::span<const double> values, double resolution,
                                  std::string unit = "units", double sample_interval = 1.0)
    {
        if (!(resolution > 0.0)) {
            throw std::invalid_argument("resolution must be positive");
        }
        std::vector<std::int64_t> ticks;
        ticks.reserve(values.size());
        for (const double v : values) {
            ticks.push_back(quantize(v, resolution));
        }
        return SensorTrace(std::move(ticks), resolution, std::move(unit), sample_interval);
    }

    std::size_t size() const noexcept { return ticks_.size(); }
    std::span<const std::int64_t> ticks() const noexcept { return ticks_; }
    double resolution() const noexcept { return resolution_; }
    const std::string& unit() const noexcept { return unit_; }
    double sample_interval() const noexcept { return sample_interval_; }
    const std::optional<std::vector<std::int64_t>>& timestamps() const noexcept
    {
        return timestamps_;
    }

    double value(std::size_t i) const noexcept
    {
        return static_cast<double>(ticks_[i]) * resolution_;
    }

    /// Empty when the trace has no gaps, otherwise one flag per sample.
    std::span<const std::uint8_t> gap_mask() const noexcept { return gaps_; }
    bool has_gaps() const noexcept { return !gaps_.empty(); }
    bool gap_before(std::size_t i) const noexcept { return !gaps_.empty() && gaps_[i] != 0; }

    std::vector<double> values() const
    {
        std::vector<double> out(ticks_.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = value(i);
        }
        return out;
    }

    /// Same metadata, new tick values (same length).
    SensorTrace with_ticks(std::vector<std::int64_t> ticks) const
    {
        if (ticks.size() != ticks_.size()) {
            throw std::invalid_argument("replacement ticks must keep the trace length");
        }
        return SensorTrace(std::move(ticks), resolution_, unit_, sample_interval_, timestamps_,
                           gaps_);
    }

    friend bool operator==(const SensorTrace&, const SensorTrace&) = default;

private:
    std::vector<std::int64_t> ticks_;
    double resolution_;
    std::string unit_;
    double sample_interval_;
    std::optional<std::vector<std::int64_t>> timestamps_;
    std::vector<std::uint8_t> gaps_;
};

// ---------------------------------------------------------------------------
// CSV input / output
// ---------------------------------------------------------------------------

struct TraceCsvOptions {
    std::string value_column = "value";
    std::optional<std::string> time_column;
    double resolution = 1.0;
    double sample_interval = 1.0;
    std::string unit = "units";
    char delimiter = ',';
};

/// Build a trace from an already-parsed table. Rows with timestamps further
/// apart than 1.5 sample intervals (or out of order) start a new segment.
inline SensorTrace trace_from_table(const CsvTable& table, const TraceCsvOptions& opts)
{
    const auto value_col = table.column(opts.value_column);
    if (!value_col) {
        throw TraceLoadError("missing value column '" + opts.value_column + "'", 1);
    }
    std::optional<std::size_t> time_col;
    if (opts.time_column) {
        time_col = table.column(*opts.time_column);
        if (!time_col) {
            throw TraceLoadError("missing timestamp column '" + *opts.time_column + "'", 1);
        }
    }
    if (table.rows.empty()) {
        throw TraceLoadError("no data rows");
    }
    if (!(opts.resolution > 0.0)) {
        throw std::invalid_argument("resolution must be positive");
    }

    std::vector<std::int64_t> ticks;
    ticks.reserve(table.rows.size());
    std::vector<std::int64_t> stamps;
    std::vector<std::uint8_t> gaps;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        if (*value_col >= row.size()) {
            throw TraceLoadError("row has no '" + opts.value_column + "' cell", line);
        }
        const auto v = parse_decimal(row[*value_col]);
        if (!v) {
            throw TraceLoadError("cannot parse '" + row[*value_col] + "' as a finite decimal",
                                 line);
        }
        ticks.push_back(quantize(*v, opts.resolution));
        if (time_col) {
            if (*time_col >= row.size()) {
                throw TraceLoadError("row has no timestamp cell", line);
            }
            const auto ts = parse_timestamp(row[*time_col]);
            if (!ts) {
                throw TraceLoadError("cannot parse timestamp '" + row[*time_col] + "'", line);
            }
            const bool gap = !stamps.empty() &&
                             (*ts <= stamps.back() || static_cast<double>(*ts - stamps.back()) >
                                                          1.5 * opts.sample_interval);
            gaps.push_back(gap ? 1 : 0);
            stamps.push_back(*ts);
        }
    }
    std::optional<std::vector<std::int64_t>> timestamps;
    if (time_col) {
        timestamps = std::move(stamps);
    }
    return SensorTrace(std::move(ticks), opts.resolution, opts.unit, opts.sample_interval,
                       std::move(timestamps), std::move(gaps));
}

inline SensorTrace load_trace_csv(const std::string& path, const TraceCsvOptions& opts)
{
    return trace_from_table(read_csv_file(path, opts.delimiter), opts);
}

inline SensorTrace load_trace_csv(const std::string& path, const std::string& value_column,
                                  double resolution, double sample_interval)
{
    TraceCsvOptions opts;
    opts.value_column = value_column;
    opts.resolution = resolution;
    opts.sample_interval = sample_interval;
    return load_trace_csv(path, opts);
}

/// Decimal text for a tick value. Uses exactly as many fractional digits as
/// the resolution needs, so reloading at the same resolution is lossless.
inline std::string format_ticks(std::int64_t ticks, double resolution)
{
    int decimals = -1;
    double scaled = resolution;
    for (int d = 0; d <= 12; ++d) {
        if (std::fabs(scaled - std::nearbyint(scaled)) <= 1e-9 * std::max(1.0, scaled)) {
            decimals = d;
            break;
        }
        scaled *= 10.0;
    }
    char buf[64];
    const double v = static_cast<double>(ticks) * resolution;
    if (decimals < 0) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
    } else {
        std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    }
    return buf;
}

/// Two-column table ("t" when timestamps exist, then the value column).
inline CsvTable trace_to_table(const SensorTrace& trace, const std::string& value_column = "value",
                               const std::string& time_column = "t")
{
    CsvTable table;
    if (trace.timestamps()) {
        table.header = {time_column, value_column};
    } else {
        table.header = {value_column};
    }
    table.rows.reserve(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::vector<std::string> row;
        if (trace.timestamps()) {
            row.push_back(std::to_string((*trace.timestamps())[i]));
        }
        row.push_back(format_ticks(trace.ticks()[i], trace.resolution()));
        table.rows.push_back(std::move(row));
    }
    return table;
}

/// Copy of `source` with the value column replaced by `trace`'s values.
inline CsvTable replace_value_column(const CsvTable& source, const std::string& value_column,
                                     const SensorTrace& trace)
{
    const auto col = source.column(value_column);
    if (!col) {
        throw TraceLoadError("missing value column '" + value_column + "'", 1);
    }
    if (source.rows.size() != trace.size()) {
        throw std::invalid_argument("row count does not match trace length");
    }
    CsvTable out = source;
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
        out.rows[r].at(*col) = format_ticks(trace.ticks()[r], trace.resolution());
    }
    return out;
}

inline void save_trace_csv(const SensorTrace& trace, const std::string& path,
                           const std::string& value_column = "value")
{
    write_csv_file(path, trace_to_table(trace, value_column));
}

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

inline constexpr double kSyntheticResolution = 0.01;

/// n i.i.d. draws from the continuous uniform law on [low, high], each rounded
/// onto the grid.
inline SensorTrace synth_uniform(double low, double high, std::size_t n, std::uint64_t seed,
                                 double resolution = kSyntheticResolution)
{
    if (!(low < high)) {
        throw std::invalid_argument("synth_uniform requires low < high");
    }
    if (n == 0) {
        throw std::invalid_argument("synth_uniform requires n >= 1");
    }
    CounterRng rng(derive_seed(seed, "synth-uniform"));
    std::vector<std::int64_t> ticks(n);
    const double width = high - low;
    for (auto& t : ticks) {
        t = quantize(low + width * rng.next_unit_closed(), resolution);
    }
    return SensorTrace(std::move(ticks), resolution);
}

inline SensorTrace synth_constant(double value, std::size_t n,
                                  double resolution = kSyntheticResolution)
{
    if (n == 0) {
        throw std::invalid_argument("synth_constant requires n >= 1");
    }
    return SensorTrace(std::vector<std::int64_t>(n, quantize(value, resolution)), resolution);
}

inline SensorTrace synth_ramp(double start, double slope, std::size_t n,
                              double resolution = kSyntheticResolution)
{
    if (n == 0) {
        throw std::invalid_argument("synth_ramp requires n >= 1");
    }
    const std::int64_t first = quantize(start, resolution);
    const std::int64_t step = ticks_on_grid(slope, resolution, "slope");
    std::vector<std::int64_t> ticks(n);
    for (std::size_t i = 0; i < n; ++i) {
        ticks[i] = first + static_cast<std::int64_t>(i) * step;
    }
    return SensorTrace(std::move(ticks), resolution);
}

/// Slowly varying signal (a bounded random walk around `level`) with isolated
/// single-slot spikes of +spike_magnitude at a `spike_fraction` of slots.
/// Models a mostly gradual process with occasional abrupt switching events.
inline SensorTrace synth_gradual_with_spikes(std::size_t n, double level, double step_std,
                                             double spike_magnitude, double spike_fraction,
                                             std::uint64_t seed,
                                             double resolution = kSyntheticResolution)
{
    if (n == 0) {
        throw std::invalid_argument("synth_gradual_with_spikes requires n >= 1");
    }
    if (spike_fraction < 0.0 || spike_fraction > 1.0) {
        throw std::invalid_argument("spike fraction must lie in [0, 1]");
    }
    CounterRng walk(derive_seed(seed, "gradual-walk"));
    CounterRng spikes(derive_seed(seed, "gradual-spikes"));
    std::vector<std::int64_t> ticks(n);
    double x = level;
    for (std::size_t i = 0; i < n; ++i) {
        x += step_std * walk.next_gaussian();
        x += 0.01 * (level - x); // mean reversion keeps the walk bounded
        double v = x;
        if (spikes.next_unit() < spike_fraction) {
            v += spike_magnitude;
        }
        ticks[i] = quantize(v, resolution);
    }
    return SensorTrace(std::move(ticks), resolution);
}

/// Per-minute photovoltaic-like output over whole days: zero at night, a
/// half-sine between 06:00 and 18:00 UTC peaking at `peak`, plus Gaussian
/// noise during daylight. Timestamps start at `start_epoch` (midnight UTC).
inline SensorTrace synth_diurnal(std::size_t days, double peak, double noise_std,
                                 std::uint64_t seed, double resolution = kSyntheticResolution,
                                 std::int64_t start_epoch = 1588291200 /* 2020-05-01 */)
{
    if (days == 0) {
        throw std::invalid_argument("synth_diurnal requires at least one day");
    }
    constexpr std::int64_t kStep = 60;
    constexpr std::int64_t kPerDay = 86400 / kStep;
    CounterRng rng(derive_seed(seed, "diurnal"));
    const std::size_t n = days * kPerDay;
    std::vector<std::int64_t> ticks(n);
    std::vector<std::int64_t> stamps(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t ts = start_epoch + static_cast<std::int64_t>(i) * kStep;
        const double hour = static_cast<double>(ts % 86400) / 3600.0;
        double v = 0.0;
        if (hour > 6.0 && hour < 18.0) {
            v = peak * std::sin(std::numbers::pi * (hour - 6.0) / 12.0) +
                noise_std * rng.next_gaussian();
            v = std::max(v, 0.0);
        }
        ticks[i] = quantize(v, resolution);
        stamps[i] = ts;
    }
    return SensorTrace(std::move(ticks), resolution, "kW", static_cast<double>(kStep),
                       std::move(stamps));
}

// ---------------------------------------------------------------------------
// Statistics and windowing
// ---------------------------------------------------------------------------

struct SummaryStats {
    double max = 0.0;
    double min = 0.0;
    double mean = 0.0;
    double median = 0.0;
    std::size_t count = 0;
};

struct TraceStats {
    SummaryStats values;
    SummaryStats deltas;
};

namespace detail {

// Ticks in, physical units out. The sum is exact in integer arithmetic, so the
// mean does not depend on summation order.
inline SummaryStats summarize_ticks(std::vector<std::int64_t> ticks, double resolution)
{
    SummaryStats s;
    s.count = ticks.size();
    __int128 sum = 0;
    for (const auto t : ticks) {
        sum += t;
    }
    std::sort(ticks.begin(), ticks.end());
    s.min = static_cast<double>(ticks.front()) * resolution;
    s.max = static_cast<double>(ticks.back()) * resolution;
    const std::size_t mid = ticks.size() / 2;
    const double median_ticks =
        ticks.size() % 2 == 1
            ? static_cast<double>(ticks[mid])
            : (static_cast<double>(ticks[mid - 1]) + static_cast<double>(ticks[mid])) / 2.0;
    s.median = median_ticks * resolution;
    s.mean = static_cast<double>(static_cast<long double>(sum) /
                                 static_cast<long double>(ticks.size())) *
             resolution;
    return s;
}

} // namespace detail

inline TraceStats trace_stats(const SensorTrace& trace)
{
    if (trace.size() < 2) {
        throw std::invalid_argument("trace_stats requires at least two samples");
    }
    std::vector<std::int64_t> deltas;
    deltas.reserve(trace.size() - 1);
    const auto t = trace.ticks();
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (!trace.gap_before(i + 1)) {
            deltas.push_back(t[i + 1] - t[i]);
        }
    }
    if (deltas.empty()) {
        throw std::invalid_argument("trace has no consecutive samples to difference");
    }
    TraceStats stats;
    stats.values = detail::summarize_ticks(std::vector<std::int64_t>(t.begin(), t.end()),
                                           trace.resolution());
    stats.deltas = detail::summarize_ticks(std::move(deltas), trace.resolution());
    return stats;
}

/// Keep samples whose UTC time of day lies in [start, end) seconds. A window
/// with start > end wraps past midnight. Each excluded span leaves a gap mark.
inline SensorTrace window_by_clock(const SensorTrace& trace, std::int64_t start_seconds,
                                   std::int64_t end_seconds)
{
    if (!trace.timestamps()) {
        throw std::invalid_argument("window_by_clock requires timestamps");
    }
    if (start_seconds < 0 || start_seconds > 86400 || end_seconds < 0 || end_seconds > 86400) {
        throw std::invalid_argument("time of day must lie in [0, 86400]");
    }
    const auto& stamps = *trace.timestamps();
    auto inside = [&](std::int64_t ts) {
        const std::int64_t tod = ((ts % 86400) + 86400) % 86400;
        if (start_seconds <= end_seconds) {
            return tod >= start_seconds && tod < end_seconds;
        }
        return tod >= start_seconds || tod < end_seconds;
    };

    std::vector<std::int64_t> ticks;
    std::vector<std::int64_t> kept_stamps;
    std::vector<std::uint8_t> gaps;
    std::optional<std::size_t> previous;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (!inside(stamps[i])) {
            continue;
        }
        const bool gap = previous && (*previous + 1 != i || trace.gap_before(i));
        ticks.push_back(trace.ticks()[i]);
        kept_stamps.push_back(stamps[i]);
        gaps.push_back(gap ? 1 : 0);
        previous = i;
    }
    if (ticks.empty()) {
        throw std::invalid_argument("clock window selects no samples");
    }
    return SensorTrace(std::move(ticks), trace.resolution(), trace.unit(),
                       trace.sample_interval(), std::move(kept_stamps), std::move(gaps));
}

/// "HH:MM" or "HH:MM:SS" to seconds since midnight; "24:00" is accepted.
inline std::int64_t parse_time_of_day(const std::string& text)
{
    int h = 0, m = 0, s = 0;
    char tail = 0;
    const int got = std::sscanf(text.c_str(), "%d:%d:%d%c", &h, &m, &s, &tail);
    if (got < 2 || got > 3 || h < 0 || m < 0 || m > 59 || s < 0 || s > 59 ||
        h * 3600 + m * 60 + s > 86400) {
        throw std::invalid_argument("bad time of day '" + text + "'");
    }
    return h * 3600 + m * 60 + s;
}

} // namespace microdistort
