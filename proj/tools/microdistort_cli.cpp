// microdistort: command-line front end.
//
//   microdistort synth    --kind uniform --low 0 --high 100 --n 1000 --seed 7
//   microdistort stats    --trace t.csv --column LIT101 --resolution 0.001
//   microdistort distort  --trace t.csv --scheme physical --epsilon 0.5 --seed 7
//   microdistort attack   --trace t.csv --kind rda --epsilon 0.5 --seed 9
//   microdistort detect   --trace observed.csv --detector filtered --epsilon 0.5 --delta-th 5 --seed 7
//   microdistort evaluate --trace t.csv --detector filtered --n 30,60 --epsilon 0.5 --delta-th 5 --seed 7
//
// Exit status: 0 success, 1 runtime error, 2 usage error. Alarms are data.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <microdistort/microdistort.hpp>

namespace md = microdistort;
using json = nlohmann::ordered_json;

namespace {

struct TraceInput {
    std::string path;
    std::string column = "value";
    std::string time_column;
    double resolution = md::kSyntheticResolution;
    double interval = 1.0;
    std::string unit = "units";
    char delimiter = ',';
    std::string delimiter_text = ",";
    std::string clock_window;

    md::TraceCsvOptions options() const
    {
        md::TraceCsvOptions o;
        o.value_column = column;
        if (!time_column.empty()) {
            o.time_column = time_column;
        }
        o.resolution = resolution;
        o.sample_interval = interval;
        o.unit = unit;
        o.delimiter = delimiter;
        return o;
    }
};

void add_trace_options(CLI::App* cmd, TraceInput& in, bool with_clock_window)
{
    cmd->add_option("--trace,-i", in.path, "Input CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--column", in.column, "Value column name")->capture_default_str();
    cmd->add_option("--time-column", in.time_column,
                    "Timestamp column (epoch seconds or ISO-8601)");
    cmd->add_option("--resolution", in.resolution, "Quantization step in physical units")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--interval", in.interval, "Nominal sample interval in seconds")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--unit", in.unit, "Unit label")->capture_default_str();
    cmd->add_option("--delimiter", in.delimiter_text, "Field delimiter")
        ->capture_default_str()
        ->check([](const std::string& s) {
            return s.size() == 1 || s == "\\t" ? std::string{} : "delimiter must be one character";
        });
    if (with_clock_window) {
        cmd->add_option("--clock-window", in.clock_window,
                        "Keep samples whose time of day is in HH:MM-HH:MM (UTC)");
    }
}

md::SensorTrace apply_clock_window(md::SensorTrace trace, const std::string& window)
{
    if (window.empty()) {
        return trace;
    }
    const auto dash = window.find('-');
    if (dash == std::string::npos) {
        throw std::invalid_argument("clock window must look like HH:MM-HH:MM");
    }
    return md::window_by_clock(trace, md::parse_time_of_day(window.substr(0, dash)),
                               md::parse_time_of_day(window.substr(dash + 1)));
}

void finish_delimiter(TraceInput& in)
{
    in.delimiter = in.delimiter_text == "\\t" ? '\t' : in.delimiter_text.front();
}

md::SensorTrace load(TraceInput& in, bool allow_clock_window = true)
{
    finish_delimiter(in);
    auto trace = md::load_trace_csv(in.path, in.options());
    if (allow_clock_window) {
        trace = apply_clock_window(std::move(trace), in.clock_window);
    }
    return trace;
}

// Writes to --out, or stdout when no path is given.
void emit(const std::string& out_path, const std::string& text)
{
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + out_path + "' for writing");
    }
    out << text;
}

std::string table_text(const md::CsvTable& table)
{
    std::ostringstream s;
    md::write_csv(s, table);
    return s.str();
}

json optional_number(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

json stats_json(const md::SummaryStats& s)
{
    return json{{"max", s.max}, {"min", s.min}, {"mean", s.mean}, {"median", s.median},
                {"count", s.count}};
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Key streams used by distort and detect. One --seed drives everything;
// --seed2/--seed3 override the derived two-layer branch seeds.
struct KeySeeds {
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> seed2;
    std::optional<std::uint64_t> seed3;

    std::uint64_t key() const { return md::derive_seed(seed, "key"); }
    md::TwoLayerKey two_layer(std::size_t n) const
    {
        return md::TwoLayerKey::generate(md::derive_seed(seed, "sk1"),
                                         seed2.value_or(md::derive_seed(seed, "sk2")),
                                         seed3.value_or(md::derive_seed(seed, "sk3")), n);
    }
};

void add_key_options(CLI::App* cmd, KeySeeds& keys)
{
    cmd->add_option("--seed", keys.seed, "Master seed for the key")->required();
    cmd->add_option("--seed2", keys.seed2, "Two-layer sk2 seed (default derived from --seed)");
    cmd->add_option("--seed3", keys.seed3, "Two-layer sk3 seed (default derived from --seed)");
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Keyed micro-distortion for sensor streams: distort, forge, detect, evaluate"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "microdistort 0.1.0");

    // ------------------------------------------------------------------ synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic trace as CSV");
    std::string synth_kind = "uniform";
    double s_low = 0.0, s_high = 100.0, s_value = 0.0, s_slope = 1.0, s_level = 100.0;
    double s_step_std = 0.5, s_spike = 25.0, s_spike_fraction = 0.01, s_peak = 1500.0;
    double s_noise = 0.0, s_res = md::kSyntheticResolution;
    std::size_t s_n = 1000, s_days = 1;
    std::optional<std::uint64_t> s_seed;
    std::string s_out;
    synth->add_option("--kind", synth_kind, "Trace shape")
        ->check(CLI::IsMember({"uniform", "constant", "ramp", "spikes", "diurnal"}))
        ->capture_default_str();
    synth->add_option("--n", s_n, "Sample count (not for diurnal)")->capture_default_str();
    synth->add_option("--low", s_low, "uniform: lower bound")->capture_default_str();
    synth->add_option("--high", s_high, "uniform: upper bound")->capture_default_str();
    synth->add_option("--value", s_value, "constant: value / ramp: start")->capture_default_str();
    synth->add_option("--slope", s_slope, "ramp: increment per sample")->capture_default_str();
    synth->add_option("--level", s_level, "spikes: base level")->capture_default_str();
    synth->add_option("--step-std", s_step_std, "spikes: random-walk step std")
        ->capture_default_str();
    synth->add_option("--spike-magnitude", s_spike, "spikes: spike height")
        ->capture_default_str();
    synth->add_option("--spike-fraction", s_spike_fraction, "spikes: fraction of spiked slots")
        ->capture_default_str();
    synth->add_option("--days", s_days, "diurnal: number of days")->capture_default_str();
    synth->add_option("--peak", s_peak, "diurnal: midday output")->capture_default_str();
    synth->add_option("--noise-std", s_noise, "diurnal: daylight noise std")
        ->capture_default_str();
    synth->add_option("--resolution", s_res, "Quantization step")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    synth->add_option("--seed", s_seed, "Seed (required for random shapes)");
    synth->add_option("--out,-o", s_out, "Output path (default stdout)");

    // ------------------------------------------------------------------ stats
    auto* stats = app.add_subcommand("stats", "Value and difference statistics of a trace");
    TraceInput st_in;
    std::string st_format = "table";
    add_trace_options(stats, st_in, true);
    stats->add_option("--format", st_format, "Output format")
        ->check(CLI::IsMember({"table", "json"}))
        ->capture_default_str();

    // ---------------------------------------------------------------- distort
    auto* distort = app.add_subcommand("distort", "Apply keyed micro-distortion");
    TraceInput d_in;
    KeySeeds d_keys;
    std::string d_scheme = "physical", d_out, d_dump_key;
    double d_eps = 0.0;
    add_trace_options(distort, d_in, false);
    add_key_options(distort, d_keys);
    distort->add_option("--scheme", d_scheme, "Distortion scheme")
        ->check(CLI::IsMember({"physical", "lsb", "two-layer"}))
        ->capture_default_str();
    distort->add_option("--epsilon", d_eps, "Distortion magnitude (physical scheme)");
    distort->add_option("--out,-o", d_out, "Output path (default stdout)");
    distort->add_option("--dump-key", d_dump_key, "Write the effective key as hex to this path");

    // ----------------------------------------------------------------- attack
    auto* attack = app.add_subcommand("attack", "Forge a stream as an impersonating attacker");
    TraceInput a_in;
    std::string a_kind = "eda", a_out;
    double a_eps = 0.0;
    std::optional<std::uint64_t> a_seed;
    add_trace_options(attack, a_in, false);
    attack->add_option("--kind", a_kind, "Attack model")
        ->check(CLI::IsMember({"eda", "rda", "lsb-guess"}))
        ->capture_default_str();
    attack->add_option("--epsilon", a_eps, "Attacker distortion magnitude (rda)");
    attack->add_option("--seed", a_seed, "Attacker seed (rda, lsb-guess)");
    attack->add_option("--out,-o", a_out, "Output path (default stdout)");

    // ----------------------------------------------------------------- detect
    auto* detect = app.add_subcommand("detect", "Run a detector on an observed stream");
    TraceInput t_in;
    KeySeeds t_keys;
    std::string t_detector = "filtered";
    md::DetectorConfig t_cfg;
    std::optional<std::size_t> t_slots;
    bool t_two_layer = false;
    add_trace_options(detect, t_in, true);
    add_key_options(detect, t_keys);
    detect->add_option("--detector", t_detector, "Detector")
        ->check(CLI::IsMember({"simple", "delta", "filtered", "lsb"}))
        ->capture_default_str();
    detect->add_option("--epsilon", t_cfg.epsilon, "Distortion magnitude");
    detect->add_option("--delta-th", t_cfg.delta_threshold, "Filtration threshold (filtered)");
    detect->add_option("--min-evidence", t_cfg.min_evidence, "Minimum kept |S01|+|S10|");
    detect->add_option("--band-low", t_cfg.band_low, "Lower gauge bound");
    detect->add_option("--band-high", t_cfg.band_high, "Upper gauge bound");
    detect->add_option("--t", t_slots, "LSB detector: slots to check (default all)");
    detect->add_flag("--two-layer", t_two_layer, "LSB detector: stream uses the two-layer key");

    // --------------------------------------------------------------- evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Monte-Carlo FP/FN rates");
    TraceInput e_in;
    std::string e_detectors = "filtered", e_windows, e_attacks = "eda,rda";
    std::string e_format = "json", e_policy = "random", e_out;
    md::DetectorConfig e_cfg;
    std::optional<std::size_t> e_trials, e_max_n;
    std::uint64_t e_seed = 0;
    std::optional<double> e_noise;
    std::size_t e_slots = 0;
    bool e_unpaired = false, e_two_layer = false, e_verbose = false;
    unsigned e_jobs = 0;
    add_trace_options(evaluate, e_in, true);
    evaluate->add_option("--detector", e_detectors, "Detector kind, or a comma list")
        ->capture_default_str();
    evaluate->add_option("--n", e_windows, "Window lengths, comma separated")->required();
    evaluate->add_option("--trials", e_trials,
                         "Trials per window (default 10000, 1000 when n >= 100000)");
    evaluate->add_option("--epsilon", e_cfg.epsilon, "Distortion magnitude");
    evaluate->add_option("--delta-th", e_cfg.delta_threshold, "Filtration threshold");
    evaluate->add_option("--min-evidence", e_cfg.min_evidence, "Minimum kept |S01|+|S10|");
    evaluate->add_option("--band-low", e_cfg.band_low, "Lower gauge bound");
    evaluate->add_option("--band-high", e_cfg.band_high, "Upper gauge bound");
    evaluate->add_option("--attack", e_attacks, "Attacks for FN cells, comma separated")
        ->capture_default_str();
    evaluate->add_option("--seed", e_seed, "Master seed")->required();
    evaluate->add_option("--format", e_format, "Report format")
        ->check(CLI::IsMember({"json", "csv", "markdown", "md"}))
        ->capture_default_str();
    evaluate->add_option("--window-policy", e_policy, "Window sampling")
        ->check(CLI::IsMember({"random", "disjoint"}))
        ->capture_default_str();
    evaluate->add_flag("--unpaired", e_unpaired, "Draw separate windows/keys per stream");
    evaluate->add_option("--noise-std", e_noise, "Additive Gaussian noise on observed streams");
    evaluate->add_option("--lsb-slots", e_slots, "LSB detector: slots checked (default n)");
    evaluate->add_flag("--two-layer", e_two_layer, "LSB detector: two-layer scheme");
    evaluate->add_option("--max-n", e_max_n, "Reject window lengths above this cap");
    evaluate->add_option("--jobs,-j", e_jobs, "Worker threads (default all cores)");
    evaluate->add_option("--out,-o", e_out, "Output path (default stdout)");
    evaluate->add_flag("--verbose,-v", e_verbose, "Progress on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code == 0) {
            return 0;
        }
        const auto parsed = app.get_subcommands();
        std::cerr << '\n' << (parsed.empty() ? app.help() : parsed.front()->help());
        return 2;
    }

    // Semantic checks that CLI11 cannot express; still usage errors.
    auto usage = [&](const std::string& msg) {
        std::cerr << json{{"error", "usage"}, {"message", msg}}.dump() << '\n';
        return 2;
    };

    try {
        if (synth->parsed()) {
            const bool random_kind = synth_kind == "uniform" || synth_kind == "spikes" ||
                                     synth_kind == "diurnal";
            if (random_kind && !s_seed) {
                return usage("--seed is required for --kind " + synth_kind);
            }
            md::SensorTrace trace = [&] {
                if (synth_kind == "uniform") {
                    return md::synth_uniform(s_low, s_high, s_n, *s_seed, s_res);
                }
                if (synth_kind == "constant") {
                    return md::synth_constant(s_value, s_n, s_res);
                }
                if (synth_kind == "ramp") {
                    return md::synth_ramp(s_value, s_slope, s_n, s_res);
                }
                if (synth_kind == "spikes") {
                    return md::synth_gradual_with_spikes(s_n, s_level, s_step_std, s_spike,
                                                         s_spike_fraction, *s_seed, s_res);
                }
                return md::synth_diurnal(s_days, s_peak, s_noise, *s_seed, s_res);
            }();
            emit(s_out, table_text(md::trace_to_table(trace)));
            return 0;
        }

        if (stats->parsed()) {
            const auto trace = load(st_in);
            const auto s = md::trace_stats(trace);
            if (st_format == "json") {
                json j{{"unit", trace.unit()},
                       {"resolution", trace.resolution()},
                       {"values", stats_json(s.values)},
                       {"deltas", stats_json(s.deltas)}};
                std::cout << j.dump(2) << '\n';
            } else {
                std::cout << "series  count      max            min            mean           "
                             "median\n";
                for (const auto& [name, v] : {std::pair{"value", s.values}, {"delta", s.deltas}}) {
                    std::printf("%-7s %-10zu %-14s %-14s %-14s %s\n", name, v.count,
                                fmt(v.max).c_str(), fmt(v.min).c_str(), fmt(v.mean).c_str(),
                                fmt(v.median).c_str());
                }
            }
            return 0;
        }

        if (distort->parsed()) {
            finish_delimiter(d_in);
            const auto opts = d_in.options();
            const auto table = md::read_csv_file(d_in.path, opts.delimiter);
            const auto trace = md::trace_from_table(table, opts);
            std::optional<md::DistortedTrace> out;
            std::string key_hex;
            if (d_scheme == "physical") {
                if (!(d_eps > 0.0)) {
                    return usage("--epsilon is required for the physical scheme");
                }
                const auto key = md::generate_keystream(d_keys.key(), trace.size());
                out = md::distort_physical(trace, key, d_eps);
                key_hex = md::to_hex(key);
            } else if (d_scheme == "lsb") {
                const auto key = md::generate_keystream(d_keys.key(), trace.size());
                out = md::distort_digital_lsb(trace, key);
                key_hex = md::to_hex(key);
            } else {
                const auto key = d_keys.two_layer(trace.size());
                out = md::distort_digital_two_layer(trace, key);
                key_hex = md::to_hex(md::effective_stream(key));
            }
            emit(d_out, table_text(md::replace_value_column(table, opts.value_column, out->readings)));
            if (!d_dump_key.empty()) {
                emit(d_dump_key, key_hex + '\n');
            }
            return 0;
        }

        if (attack->parsed()) {
            finish_delimiter(a_in);
            const auto opts = a_in.options();
            const auto table = md::read_csv_file(a_in.path, opts.delimiter);
            const auto trace = md::trace_from_table(table, opts);
            const auto kind = md::parse_attack_kind(a_kind);
            if (kind != md::AttackKind::eda && !a_seed) {
                return usage("--seed is required for --kind " + a_kind);
            }
            std::optional<md::DistortedTrace> forged;
            switch (kind) {
            case md::AttackKind::rda:
                if (!(a_eps > 0.0)) {
                    return usage("--epsilon is required for rda");
                }
                forged = md::attack_rda(trace, a_eps, md::derive_seed(*a_seed, "attacker"));
                break;
            case md::AttackKind::lsb_guess:
                forged = md::attack_lsb_guess(trace, md::derive_seed(*a_seed, "attacker"));
                break;
            default:
                forged = md::attack_eda(trace);
                break;
            }
            emit(a_out, table_text(md::replace_value_column(table, opts.value_column, forged->readings)));
            return 0;
        }

        if (detect->parsed()) {
            const auto kind = md::parse_detector_kind(t_detector);
            const auto trace = load(t_in);
            const md::DistortedTrace observed{trace, 0.0, md::Scheme::forged};
            md::DetectionVerdict v;
            if (kind == md::DetectorKind::lsb) {
                const std::size_t t = t_slots.value_or(trace.size());
                if (t_two_layer) {
                    v = md::detect_lsb(observed, t_keys.two_layer(trace.size()), t);
                } else {
                    v = md::detect_lsb(observed, md::generate_keystream(t_keys.key(), trace.size()),
                                       t);
                }
            } else {
                if (!(t_cfg.epsilon > 0.0)) {
                    return usage("--epsilon is required for the " + t_detector + " detector");
                }
                if (kind == md::DetectorKind::filtered && !t_cfg.delta_threshold) {
                    return usage("--delta-th is required for the filtered detector");
                }
                v = md::detect(kind, observed, md::generate_keystream(t_keys.key(), trace.size()),
                               t_cfg);
            }
            json counts;
            if (kind == md::DetectorKind::lsb) {
                counts = {{"checked", v.counts.checked}, {"mismatches", v.counts.mismatches}};
            } else if (kind == md::DetectorKind::simple) {
                counts = {{"ones", v.counts.ones}, {"zeros", v.counts.zeros}};
            } else {
                counts = {{"s00", v.counts.s00},           {"s01", v.counts.s01},
                          {"s10", v.counts.s10},           {"s11", v.counts.s11},
                          {"filtered", v.counts.filtered}, {"gaps", v.counts.gaps}};
            }
            json out{{"alarm", v.alarm},
                     {"reason", std::string(md::to_string(v.reason))},
                     {"x", optional_number(v.x)}};
            if (kind == md::DetectorKind::simple) {
                out["mu1"] = optional_number(v.mu1);
                out["mu0"] = optional_number(v.mu0);
            } else {
                out["mu01"] = optional_number(v.mu01);
                out["mu10"] = optional_number(v.mu10);
            }
            out["counts"] = counts;
            std::cout << out.dump(2) << '\n';
            return 0;
        }

        if (evaluate->parsed()) {
            std::vector<md::DetectorKind> kinds;
            std::vector<std::size_t> windows;
            std::vector<md::AttackKind> attacks;
            try {
                for (const auto& d : split_list(e_detectors)) {
                    kinds.push_back(md::parse_detector_kind(d));
                }
                for (const auto& n : split_list(e_windows)) {
                    std::size_t pos = 0;
                    const unsigned long long v = std::stoull(n, &pos);
                    if (pos != n.size()) {
                        throw std::invalid_argument("bad window length '" + n + "'");
                    }
                    windows.push_back(static_cast<std::size_t>(v));
                }
                for (const auto& a : split_list(e_attacks)) {
                    attacks.push_back(md::parse_attack_kind(a));
                }
            } catch (const std::exception& ex) {
                return usage(ex.what());
            }
            if (kinds.empty() || windows.empty()) {
                return usage("--detector and --n must name at least one value");
            }
            std::size_t max_window = 0;
            for (const auto n : windows) {
                max_window = std::max(max_window, n);
                if (e_max_n && n > *e_max_n) {
                    return usage("window n = " + std::to_string(n) + " exceeds --max-n " +
                                 std::to_string(*e_max_n));
                }
            }

            const auto trace = load(e_in);
            md::TrialConfig base;
            base.trials = e_trials.value_or(max_window >= 100'000 ? 1000 : 10'000);
            base.detector_config = e_cfg;
            base.attacks = attacks;
            base.master_seed = e_seed;
            base.window_policy = md::parse_window_policy(e_policy);
            base.paired = !e_unpaired;
            base.noise_std = e_noise;
            base.lsb_slots = e_slots;
            base.two_layer = e_two_layer;
            base.jobs = e_jobs;

            std::vector<md::FpFnReport> reports;
            for (const auto kind : kinds) {
                base.detector = kind;
                const auto started = std::chrono::steady_clock::now();
                auto part = md::sweep(trace, base, windows);
                if (e_verbose) {
                    const std::chrono::duration<double> took =
                        std::chrono::steady_clock::now() - started;
                    std::cerr << md::to_string(kind) << ": " << windows.size() << " window(s), "
                              << base.trials << " trials each, " << took.count() << " s\n";
                }
                reports.insert(reports.end(), part.begin(), part.end());
            }
            emit(e_out, md::emit_report(reports, md::parse_report_format(e_format)));
            return 0;
        }
    } catch (const md::TraceLoadError& e) {
        json err{{"error", "trace-load"}, {"message", e.what()}};
        if (e.row() != 0) {
            err["line"] = e.row();
        }
        std::cerr << err.dump() << '\n';
        return 1;
    } catch (const md::KeyExhaustedError& e) {
        std::cerr << json{{"error", "key-exhausted"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << json{{"error", "invalid-argument"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}
