#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "attacker.hpp"
#include "detection.hpp"
#include "distortion.hpp"
#include "keystream.hpp"
#include "random.hpp"
#include "trace.hpp"

// Monte-Carlo FP/FN harness.
//
// Trial i draws a window start, a fresh keystream, and (per attack kind) an
// attacker seed, all derived from (master_seed, label, i). Trials are handed
// to a worker pool in any order; outcomes are stored by trial index and
// aggregated afterwards, so the report does not depend on the worker count.

namespace microdistort {

enum class WindowPolicy {
    random,   // uniform start offsets, with replacement
    disjoint, // consecutive non-overlapping windows, wrapping when exhausted
};

constexpr std::string_view to_string(WindowPolicy p) noexcept
{
    return p == WindowPolicy::random ? "random" : "disjoint";
}

inline WindowPolicy parse_window_policy(std::string_view text)
{
    if (text == "random") return WindowPolicy::random;
    if (text == "disjoint") return WindowPolicy::disjoint;
    throw std::invalid_argument("unknown window policy '" + std::string(text) + "'");
}

struct TrialConfig {
    DetectorKind detector = DetectorKind::filtered;
    std::size_t window = 0;
    std::size_t trials = 1000;
    DetectorConfig detector_config;
    std::vector<AttackKind> attacks{AttackKind::eda, AttackKind::rda};
    std::uint64_t master_seed = 0;
    WindowPolicy window_policy = WindowPolicy::random;
    /// FP and FN trials with the same index share window and key.
    bool paired = true;
    /// Additive Gaussian noise (physical units) on every observed stream.
    std::optional<double> noise_std;
    /// LSB detector: slots checked per window (0 = whole window).
    std::size_t lsb_slots = 0;
    /// LSB detector: honest stream uses the two-layer scheme.
    bool two_layer = false;
    /// Worker threads (0 = hardware concurrency). Never affects results.
    unsigned jobs = 0;
};

/// Wilson score interval for a binomial proportion, as fractions.
struct Interval {
    double low = 0.0;
    double high = 0.0;
};

inline constexpr double kZ95 = 1.959963984540054;

inline Interval wilson_interval(std::size_t events, std::size_t trials, double z = kZ95)
{
    if (trials == 0) {
        return {0.0, 1.0};
    }
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(events) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct RateEstimate {
    std::size_t events = 0;
    std::size_t trials = 0;
    double pct = 0.0;
    /// Wilson 95% bounds and half-width, in percent.
    double ci_low_pct = 0.0;
    double ci_high_pct = 0.0;
    double ci_half_pct = 0.0;

    static RateEstimate from_counts(std::size_t events, std::size_t trials)
    {
        RateEstimate r;
        r.events = events;
        r.trials = trials;
        r.pct = trials == 0 ? 0.0 : 100.0 * static_cast<double>(events) / static_cast<double>(trials);
        const Interval ci = wilson_interval(events, trials);
        r.ci_low_pct = 100.0 * ci.low;
        r.ci_high_pct = 100.0 * ci.high;
        r.ci_half_pct = 100.0 * (ci.high - ci.low) / 2.0;
        return r;
    }

    friend bool operator==(const RateEstimate&, const RateEstimate&) = default;
};

struct FpFnReport {
    DetectorKind detector = DetectorKind::filtered;
    std::size_t window = 0;
    std::size_t trials = 0;
    RateEstimate fp;
    std::vector<std::pair<AttackKind, RateEstimate>> fn;
    nlohmann::ordered_json config;

    std::optional<RateEstimate> fn_for(AttackKind kind) const
    {
        for (const auto& [k, r] : fn) {
            if (k == kind) {
                return r;
            }
        }
        return std::nullopt;
    }
};

namespace detail {

inline void add_noise(std::span<std::int64_t> ticks, double std_ticks, CounterRng rng) noexcept
{
    for (auto& t : ticks) {
        t = static_cast<std::int64_t>(
            std::nearbyint(static_cast<double>(t) + std_ticks * rng.next_gaussian()));
    }
}

inline std::size_t window_start(const TrialConfig& cfg, std::size_t trace_len,
                                std::string_view label, std::size_t trial)
{
    const std::size_t positions = trace_len - cfg.window + 1;
    if (cfg.window_policy == WindowPolicy::disjoint) {
        const std::size_t slots = trace_len / cfg.window;
        return (trial % slots) * cfg.window;
    }
    CounterRng rng(derive_seed(cfg.master_seed, label, trial));
    return static_cast<std::size_t>(rng.next_below(positions));
}

struct TrialWorkspace {
    std::vector<std::uint8_t> key;
    std::vector<std::uint8_t> aux; // sk1 / attacker coins
    std::vector<std::uint8_t> aux2; // sk2
    std::vector<std::int64_t> observed;
};

// Runs one detector on one window and says whether it alarmed.
class TrialRunner {
public:
    TrialRunner(const SensorTrace& trace, const TrialConfig& cfg)
        : trace_(trace), cfg_(cfg),
          resolved_(resolve_config(cfg.detector_config, cfg.detector, cfg.window,
                                   trace.resolution()))
    {
        if (cfg_.detector != DetectorKind::lsb || needs_epsilon()) {
            epsilon_ = ticks_on_grid(cfg.detector_config.epsilon, trace.resolution(), "epsilon");
        }
        if (cfg.noise_std) {
            if (!(*cfg.noise_std >= 0.0)) {
                throw std::invalid_argument("noise std must be non-negative");
            }
            noise_ticks_ = *cfg.noise_std / trace.resolution();
        }
        lsb_slots_ = cfg.lsb_slots == 0 ? cfg.window : cfg.lsb_slots;
        if (lsb_slots_ > cfg.window) {
            throw std::invalid_argument("lsb slots exceed the window length");
        }
    }

    const ResolvedConfig& resolved() const noexcept { return resolved_; }

    /// Alarm for one stream. `attack` is none for the honest stream.
    bool run(std::size_t trial, AttackKind attack, TrialWorkspace& ws) const
    {
        const std::size_t n = cfg_.window;
        const std::string_view tag = cfg_.paired ? std::string_view{} : to_string(attack);
        const std::string key_label = "key" + std::string(tag.empty() ? "" : "-") + std::string(tag);
        const std::string win_label =
            "window" + std::string(tag.empty() ? "" : "-") + std::string(tag);

        const std::size_t start = window_start(cfg_, trace_.size(), win_label, trial);
        const auto source = trace_.ticks().subspan(start, n);
        const auto gaps = trace_.has_gaps() ? trace_.gap_mask().subspan(start, n)
                                            : std::span<const std::uint8_t>{};

        ws.key.resize(n);
        ws.aux.resize(n);
        ws.observed.resize(n);
        const std::uint64_t key_seed = derive_seed(cfg_.master_seed, key_label, trial);
        fill_key_bits(key_seed, ws.key);
        if (cfg_.detector == DetectorKind::lsb && cfg_.two_layer) {
            // Effective bits of (sk1, sk2, sk3); sk3 reuses the key buffer.
            ws.aux2.resize(n);
            fill_key_bits(derive_seed(key_seed, "sk1"), ws.aux);
            fill_key_bits(derive_seed(key_seed, "sk2"), ws.aux2);
            fill_key_bits(derive_seed(key_seed, "sk3"), ws.key);
            for (std::size_t i = 0; i < n; ++i) {
                ws.key[i] = select_bit(ws.aux[i], ws.aux2[i], ws.key[i]);
            }
        }

        const bool digital = cfg_.detector == DetectorKind::lsb;
        switch (attack) {
        case AttackKind::none:
            if (digital) {
                apply_lsb(source, ws.key, ws.observed);
            } else {
                apply_physical(source, ws.key, epsilon_, ws.observed);
            }
            break;
        case AttackKind::eda:
            std::copy(source.begin(), source.end(), ws.observed.begin());
            break;
        case AttackKind::rda: {
            const std::uint64_t attacker = derive_seed(cfg_.master_seed, "attacker-rda", trial);
            fill_attacker_coins(attacker, ws.aux);
            apply_physical(source, ws.aux, epsilon_, ws.observed);
            break;
        }
        case AttackKind::lsb_guess: {
            const std::uint64_t attacker = derive_seed(cfg_.master_seed, "attacker-lsb", trial);
            fill_attacker_coins(attacker, ws.aux);
            apply_lsb(source, ws.aux, ws.observed);
            break;
        }
        }

        if (noise_ticks_ > 0.0) {
            const std::string noise_label = "noise-" + std::string(to_string(attack));
            add_noise(ws.observed, noise_ticks_,
                      CounterRng(derive_seed(cfg_.master_seed, noise_label, trial)));
        }

        const double res = trace_.resolution();
        switch (cfg_.detector) {
        case DetectorKind::simple:
            return judge_level_tally(tally_levels(ws.observed, ws.key), resolved_, res).alarm;
        case DetectorKind::delta:
        case DetectorKind::filtered:
            return judge_delta_tally(tally_deltas(ws.observed, gaps, ws.key, resolved_.threshold),
                                     resolved_, res)
                .alarm;
        case DetectorKind::lsb:
            return judge_lsb(ws.observed, ws.key, lsb_slots_).alarm;
        }
        return true;
    }

private:
    bool needs_epsilon() const
    {
        return std::find(cfg_.attacks.begin(), cfg_.attacks.end(), AttackKind::rda) !=
               cfg_.attacks.end();
    }

    const SensorTrace& trace_;
    const TrialConfig& cfg_;
    ResolvedConfig resolved_;
    std::int64_t epsilon_ = 0;
    double noise_ticks_ = 0.0;
    std::size_t lsb_slots_ = 0;
};

inline nlohmann::ordered_json config_echo(const SensorTrace& trace, const TrialConfig& cfg,
                                          const ResolvedConfig& resolved)
{
    nlohmann::ordered_json j;
    j["detector"] = std::string(to_string(cfg.detector));
    j["n"] = cfg.window;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.master_seed;
    const double res = trace.resolution();
    if (cfg.detector != DetectorKind::lsb) {
        j["epsilon"] = cfg.detector_config.epsilon;
        j["band_low"] = resolved.band_low * res;
        j["band_high"] = resolved.band_high * res;
    }
    if (cfg.detector == DetectorKind::filtered) {
        j["delta_th"] = *cfg.detector_config.delta_threshold;
    }
    if (cfg.detector == DetectorKind::delta || cfg.detector == DetectorKind::filtered) {
        j["min_evidence"] = resolved.min_evidence;
    }
    if (cfg.detector == DetectorKind::lsb) {
        j["lsb_slots"] = cfg.lsb_slots == 0 ? cfg.window : cfg.lsb_slots;
        j["scheme"] = cfg.two_layer ? "two-layer" : "lsb";
    }
    auto attacks = nlohmann::ordered_json::array();
    for (const auto a : cfg.attacks) {
        attacks.push_back(std::string(to_string(a)));
    }
    j["attacks"] = attacks;
    j["window_policy"] = std::string(to_string(cfg.window_policy));
    j["paired"] = cfg.paired;
    if (cfg.noise_std) {
        j["noise_std"] = *cfg.noise_std;
    }
    j["trace"] = {{"length", trace.size()}, {"resolution", res}, {"unit", trace.unit()}};
    return j;
}

} // namespace detail

inline FpFnReport run_trials(const SensorTrace& trace, const TrialConfig& config)
{
    if (config.window < 3) {
        throw std::invalid_argument("window n must be at least 3");
    }
    if (config.trials == 0) {
        throw std::invalid_argument("trials must be at least 1");
    }
    if (trace.size() < config.window) {
        throw std::invalid_argument("trace (" + std::to_string(trace.size()) +
                                    " samples) is shorter than the window n = " +
                                    std::to_string(config.window));
    }
    for (const auto a : config.attacks) {
        if (a == AttackKind::none) {
            throw std::invalid_argument("attack list must not contain 'none'");
        }
    }

    const detail::TrialRunner runner(trace, config);
    const std::size_t T = config.trials;
    const std::size_t A = config.attacks.size();
    // outcome[t * (A + 1)]: honest alarm; outcome[t * (A + 1) + 1 + a]: attack a alarm.
    std::vector<std::uint8_t> outcome(T * (A + 1));

    unsigned jobs = config.jobs != 0 ? config.jobs : std::thread::hardware_concurrency();
    jobs = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(T)));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    constexpr std::size_t kChunk = 16;

    auto worker = [&] {
        detail::TrialWorkspace ws;
        try {
            for (;;) {
                const std::size_t begin = next.fetch_add(kChunk);
                if (begin >= T) {
                    break;
                }
                const std::size_t end = std::min(T, begin + kChunk);
                for (std::size_t t = begin; t < end; ++t) {
                    std::uint8_t* row = &outcome[t * (A + 1)];
                    row[0] = runner.run(t, AttackKind::none, ws) ? 1 : 0;
                    for (std::size_t a = 0; a < A; ++a) {
                        row[1 + a] = runner.run(t, config.attacks[a], ws) ? 1 : 0;
                    }
                }
            }
        } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) {
                failure = std::current_exception();
            }
            next.store(T);
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (unsigned i = 0; i < jobs; ++i) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::size_t fp_events = 0;
    std::vector<std::size_t> missed(A, 0);
    for (std::size_t t = 0; t < T; ++t) {
        const std::uint8_t* row = &outcome[t * (A + 1)];
        fp_events += row[0];
        for (std::size_t a = 0; a < A; ++a) {
            missed[a] += row[1 + a] == 0 ? 1 : 0;
        }
    }

    FpFnReport report;
    report.detector = config.detector;
    report.window = config.window;
    report.trials = T;
    report.fp = RateEstimate::from_counts(fp_events, T);
    for (std::size_t a = 0; a < A; ++a) {
        report.fn.emplace_back(config.attacks[a], RateEstimate::from_counts(missed[a], T));
    }
    report.config = detail::config_echo(trace, config, runner.resolved());
    return report;
}

/// One run_trials per window length, ordered by n.
inline std::vector<FpFnReport> sweep(const SensorTrace& trace, const TrialConfig& base,
                                     std::vector<std::size_t> windows)
{
    std::stable_sort(windows.begin(), windows.end());
    std::vector<FpFnReport> reports;
    reports.reserve(windows.size());
    for (const auto n : windows) {
        TrialConfig cfg = base;
        cfg.window = n;
        reports.push_back(run_trials(trace, cfg));
    }
    return reports;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

enum class ReportFormat { json, csv, markdown };

inline ReportFormat parse_report_format(std::string_view text)
{
    if (text == "json") return ReportFormat::json;
    if (text == "csv") return ReportFormat::csv;
    if (text == "markdown" || text == "md") return ReportFormat::markdown;
    throw std::invalid_argument("unknown report format '" + std::string(text) + "'");
}

inline nlohmann::ordered_json to_json(const RateEstimate& r)
{
    nlohmann::ordered_json j;
    j["pct"] = r.pct;
    j["events"] = r.events;
    j["trials"] = r.trials;
    j["ci95_low_pct"] = r.ci_low_pct;
    j["ci95_high_pct"] = r.ci_high_pct;
    j["ci95_half_width_pct"] = r.ci_half_pct;
    return j;
}

inline RateEstimate rate_from_json(const nlohmann::ordered_json& j)
{
    RateEstimate r;
    r.pct = j.at("pct").get<double>();
    r.events = j.at("events").get<std::size_t>();
    r.trials = j.at("trials").get<std::size_t>();
    r.ci_low_pct = j.at("ci95_low_pct").get<double>();
    r.ci_high_pct = j.at("ci95_high_pct").get<double>();
    r.ci_half_pct = j.at("ci95_half_width_pct").get<double>();
    return r;
}

inline nlohmann::ordered_json to_json(const FpFnReport& report)
{
    nlohmann::ordered_json j;
    j["detector"] = std::string(to_string(report.detector));
    j["n"] = report.window;
    j["trials"] = report.trials;
    j["fp"] = to_json(report.fp);
    nlohmann::ordered_json fn = nlohmann::ordered_json::object();
    for (const auto& [kind, rate] : report.fn) {
        fn[std::string(to_string(kind))] = to_json(rate);
    }
    j["fn"] = fn;
    j["config"] = report.config;
    return j;
}

inline FpFnReport report_from_json(const nlohmann::ordered_json& j)
{
    FpFnReport r;
    r.detector = parse_detector_kind(j.at("detector").get<std::string>());
    r.window = j.at("n").get<std::size_t>();
    r.trials = j.at("trials").get<std::size_t>();
    r.fp = rate_from_json(j.at("fp"));
    for (const auto& [key, value] : j.at("fn").items()) {
        r.fn.emplace_back(parse_attack_kind(key), rate_from_json(value));
    }
    r.config = j.at("config");
    return r;
}

namespace detail {

inline std::string fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string_view detector_title(DetectorKind k)
{
    switch (k) {
    case DetectorKind::simple: return "Simple Mean Difference";
    case DetectorKind::delta: return "Δ Mean Difference";
    case DetectorKind::filtered: return "Filtered Δ Mean Difference";
    case DetectorKind::lsb: return "LSB Check";
    }
    return "?";
}

} // namespace detail

inline std::string emit_report(std::span<const FpFnReport> reports, ReportFormat format)
{
    std::ostringstream out;
    switch (format) {
    case ReportFormat::json: {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : reports) {
            arr.push_back(to_json(r));
        }
        out << arr.dump(2) << '\n';
        break;
    }
    case ReportFormat::csv: {
        out << "detector,n,fp_pct,fn_eda_pct,fn_rda_pct,trials\n";
        for (const auto& r : reports) {
            const auto eda = r.fn_for(AttackKind::eda);
            const auto rda = r.fn_for(AttackKind::rda);
            out << to_string(r.detector) << ',' << r.window << ',' << detail::fixed(r.fp.pct, 4)
                << ',' << (eda ? detail::fixed(eda->pct, 4) : "") << ','
                << (rda ? detail::fixed(rda->pct, 4) : "") << ',' << r.trials << '\n';
        }
        break;
    }
    case ReportFormat::markdown: {
        std::vector<DetectorKind> groups;
        std::vector<std::size_t> windows;
        for (const auto& r : reports) {
            if (std::find(groups.begin(), groups.end(), r.detector) == groups.end()) {
                groups.push_back(r.detector);
            }
            if (std::find(windows.begin(), windows.end(), r.window) == windows.end()) {
                windows.push_back(r.window);
            }
        }
        std::sort(windows.begin(), windows.end());
        out << "| n |";
        for (const auto g : groups) {
            const auto title = detail::detector_title(g);
            out << ' ' << title << " FP (%) | " << title << " FN EDA (%) | " << title
                << " FN RDA (%) |";
        }
        out << "\n|---:|";
        for (std::size_t i = 0; i < groups.size(); ++i) {
            out << "---:|---:|---:|";
        }
        out << '\n';
        for (const auto n : windows) {
            out << "| " << n << " |";
            for (const auto g : groups) {
                const auto it = std::find_if(reports.begin(), reports.end(), [&](const auto& r) {
                    return r.detector == g && r.window == n;
                });
                if (it == reports.end()) {
                    out << " - | - | - |";
                    continue;
                }
                const auto eda = it->fn_for(AttackKind::eda);
                const auto rda = it->fn_for(AttackKind::rda);
                out << ' ' << detail::fixed(it->fp.pct, 2) << " | "
                    << (eda ? detail::fixed(eda->pct, 2) : "-") << " | "
                    << (rda ? detail::fixed(rda->pct, 2) : "-") << " |";
            }
            out << '\n';
        }
        break;
    }
    }
    return out.str();
}

inline std::string emit_report(const FpFnReport& report, ReportFormat format)
{
    return emit_report(std::span<const FpFnReport>(&report, 1), format);
}

} // namespace microdistort
