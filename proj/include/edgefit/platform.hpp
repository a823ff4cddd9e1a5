#pragma once

// Arithmetic platform model: measured (clock, power, latency, MACs) in,
// throughput / MAC per cycle / energy / efficiency out. Plus a host
// micro-benchmark and a real-time budget check.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "edgefit/dataset.hpp"
#include "edgefit/error.hpp"

namespace edgefit {

struct PlatformProfile {
    std::string name;
    double clock_hz = 0.0;
    double power_mw = 0.0;
    double time_per_inference_ms = 0.0;
    std::uint64_t mac_count = 0;

    void validate() const {
        if (!(clock_hz > 0.0 && power_mw > 0.0 && time_per_inference_ms > 0.0 && mac_count > 0))
            fail(ErrorKind::InvalidConfig, "profile '" + name + "' needs positive clock, power, time and MACs");
    }
};

struct DerivedMetrics {
    double throughput_mmacs = 0.0;    // MMAC/s
    double mac_per_cycle = 0.0;
    double energy_mj = 0.0;           // per inference
    double efficiency_gmacspw = 0.0;  // GMAC/s/W
};

inline DerivedMetrics derive_metrics(const PlatformProfile& p) {
    p.validate();
    DerivedMetrics d;
    const double seconds = p.time_per_inference_ms * 1e-3;
    const double macs_per_s = static_cast<double>(p.mac_count) / seconds;
    d.throughput_mmacs = macs_per_s * 1e-6;
    d.mac_per_cycle = macs_per_s / p.clock_hz;
    d.energy_mj = p.power_mw * seconds;              // mW * s = mJ
    d.efficiency_gmacspw = d.throughput_mmacs / p.power_mw;  // (1e6 MAC/s) / (1e-3 W) = GMAC/s/W
    return d;
}

/// Measured GAP8 / Cortex-M4 / Cortex-M7 reference profiles, two clocks each.
inline std::vector<PlatformProfile> builtin_profiles() {
    return {
        {"GAP8@80MHz", 80e6, 54.60, 6.8, 3'051'812},
        {"GAP8@175MHz", 175e6, 129.36, 3.2, 3'051'812},
        {"Cortex-M4@60MHz", 60e6, 47.16, 114.25, 3'039'408},
        {"Cortex-M4@120MHz", 120e6, 85.67, 60.36, 3'039'408},
        {"Cortex-M7@108MHz", 108e6, 185.49, 41.74, 3'039'408},
        {"Cortex-M7@216MHz", 216e6, 386.73, 20.88, 3'039'408},
    };
}

/// Delimited text: name, clock_hz, power_mw, time_ms, mac_count. An optional
/// header row (first field "name") and '#' comments are skipped.
inline std::vector<PlatformProfile> parse_profiles(std::istream& in) {
    std::vector<PlatformProfile> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const std::size_t this_row = row++;
        const auto f = detail::split_fields(line);
        if (f.empty() || f[0].empty() || f[0].front() == '#') continue;
        if (f[0] == "name") continue;
        if (f.size() != 5) throw MalformedRowError(this_row, "profile rows need 5 fields");
        PlatformProfile p;
        p.name = std::string(f[0]);
        const auto clock = detail::parse_number<double>(f[1]);
        const auto power = detail::parse_number<double>(f[2]);
        const auto time = detail::parse_number<double>(f[3]);
        const auto macs = detail::parse_number<std::uint64_t>(f[4]);
        if (!clock || !power || !time || !macs) throw MalformedRowError(this_row, "unparseable profile field");
        p.clock_hz = *clock;
        p.power_mw = *power;
        p.time_per_inference_ms = *time;
        p.mac_count = *macs;
        try {
            p.validate();
        } catch (const Error& e) {
            throw MalformedRowError(this_row, e.what());
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<PlatformProfile> load_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::EmptyDataset, "cannot open profile file '" + path.string() + "'");
    auto p = parse_profiles(in);
    if (p.empty()) fail(ErrorKind::EmptyDataset, "no profiles in '" + path.string() + "'");
    return p;
}

struct SpeedupRow {
    std::string name;
    double speedup = 1.0;          // baseline time / this time
    double efficiency_ratio = 1.0; // this efficiency / baseline efficiency
    double mac_per_cycle_ratio = 1.0;
};

struct SpeedupReport {
    std::string baseline;
    std::vector<SpeedupRow> rows;
};

/// How much faster / more efficient `baseline` is than each profile:
/// speedup = time(profile) / time(baseline).
inline SpeedupReport speedup_table(const std::vector<PlatformProfile>& profiles, std::size_t baseline = 0) {
    if (profiles.size() < 2) fail(ErrorKind::FewerThanTwoProfiles, "speedup comparison needs at least two profiles");
    if (baseline >= profiles.size()) fail(ErrorKind::InvalidConfig, "baseline index out of range");
    const auto& base = profiles[baseline];
    const DerivedMetrics bd = derive_metrics(base);
    SpeedupReport r{base.name, {}};
    for (const auto& p : profiles) {
        const DerivedMetrics d = derive_metrics(p);
        r.rows.push_back({p.name, p.time_per_inference_ms / base.time_per_inference_ms,
                          bd.efficiency_gmacspw / d.efficiency_gmacspw, bd.mac_per_cycle / d.mac_per_cycle});
    }
    return r;
}

struct RealtimeCheck {
    bool feasible = false;
    double budget_ms = 0.0;
    double margin = 0.0;  // budget / time
};

/// A new window arrives every stride/rate seconds; inference must fit in it.
inline RealtimeCheck realtime_check(double time_per_inference_ms, std::size_t window_stride_samples,
                                    double rate_hz = kSampleRateHz) {
    if (!(time_per_inference_ms > 0.0) || window_stride_samples == 0 || !(rate_hz > 0.0))
        fail(ErrorKind::InvalidConfig, "realtime_check needs positive inputs");
    RealtimeCheck r;
    r.budget_ms = static_cast<double>(window_stride_samples) / rate_hz * 1e3;
    r.margin = r.budget_ms / time_per_inference_ms;
    r.feasible = time_per_inference_ms < r.budget_ms;
    return r;
}

struct BenchResult {
    std::size_t runs = 0;
    double median_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
    double throughput_mmacs = 0.0;
};

/// Times `infer()` n_runs times (after one warm-up call) on the calling thread.
template <typename Infer>
BenchResult host_bench(Infer&& infer, std::uint64_t mac_count, std::size_t n_runs) {
    if (n_runs < 10) fail(ErrorKind::InvalidConfig, "host_bench needs at least 10 runs");
    infer();
    std::vector<double> ms;
    ms.reserve(n_runs);
    for (std::size_t i = 0; i < n_runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        infer();
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    BenchResult r;
    r.runs = n_runs;
    r.median_ms = n_runs % 2 ? ms[n_runs / 2] : 0.5 * (ms[n_runs / 2 - 1] + ms[n_runs / 2]);
    r.min_ms = ms.front();
    r.max_ms = ms.back();
    r.throughput_mmacs = static_cast<double>(mac_count) / (r.median_ms * 1e-3) * 1e-6;
    return r;
}

// ---- reports -------------------------------------------------------------

inline void print_platform_table(std::ostream& os, const std::vector<PlatformProfile>& profiles) {
    const int label_w = 24, col_w = 18;
    auto row = [&](const std::string& label, auto&& cell) {
        os << std::left << std::setw(label_w) << label << std::right;
        for (const auto& p : profiles) os << std::setw(col_w) << cell(p);
        os << "\n";
    };
    auto fmt = [](double v, int prec) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(prec) << v;
        return s.str();
    };
    row("Platform", [](const PlatformProfile& p) { return p.name; });
    row("MAC", [](const PlatformProfile& p) { return std::to_string(p.mac_count); });
    row("Clock [MHz]", [&](const PlatformProfile& p) { return fmt(p.clock_hz * 1e-6, 0); });
    row("Time/Inference[ms]", [&](const PlatformProfile& p) { return fmt(p.time_per_inference_ms, 2); });
    row("Throughput [MMAC/s]", [&](const PlatformProfile& p) { return fmt(derive_metrics(p).throughput_mmacs, 2); });
    row("MAC/cycle", [&](const PlatformProfile& p) { return fmt(derive_metrics(p).mac_per_cycle, 3); });
    row("Power [mW]", [&](const PlatformProfile& p) { return fmt(p.power_mw, 2); });
    row("Energy/inference [mJ]", [&](const PlatformProfile& p) { return fmt(derive_metrics(p).energy_mj, 2); });
    row("En. eff. [GMAC/s/W]", [&](const PlatformProfile& p) { return fmt(derive_metrics(p).efficiency_gmacspw, 3); });
}

inline void print_platform_kv(std::ostream& os, const std::vector<PlatformProfile>& profiles) {
    os.precision(10);
    for (const auto& p : profiles) {
        const auto d = derive_metrics(p);
        os << p.name << ".throughput_mmacs=" << d.throughput_mmacs << "\n"
           << p.name << ".mac_per_cycle=" << d.mac_per_cycle << "\n"
           << p.name << ".energy_mj=" << d.energy_mj << "\n"
           << p.name << ".efficiency_gmacspw=" << d.efficiency_gmacspw << "\n";
    }
}

inline void print_speedups(std::ostream& os, const SpeedupReport& r) {
    os << "baseline: " << r.baseline << "\n";
    os << std::left << std::setw(24) << "profile" << std::right << std::setw(12) << "speedup" << std::setw(14)
       << "MAC/cyc x" << std::setw(14) << "eff x" << "\n";
    for (const auto& row : r.rows)
        os << std::left << std::setw(24) << row.name << std::right << std::fixed << std::setprecision(2)
           << std::setw(11) << row.speedup << "x" << std::setw(13) << row.mac_per_cycle_ratio << "x"
           << std::setw(13) << row.efficiency_ratio << "x\n";
    os.unsetf(std::ios::fixed);
}

}  // namespace edgefit
