#pragma once

// Synthetic wrist-sensor sessions for tests: each session alternates Null
// stretches with every workout class in shuffled order. Classes differ in
// oscillation frequency, per-channel amplitude and offset; subjects differ in
// gain and phase, so cross-subject generalization is non-trivial but learnable.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <vector>

#include "edgefit/dataset.hpp"

namespace edgefit::testkit {

struct SyntheticOptions {
    int subjects = 10;
    int sessions = 5;
    std::size_t null_len = 60;
    std::size_t exercise_len = 100;
    double noise = 0.15;
    std::uint64_t seed = 1;
};

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::vector<Recording> synthetic_recordings(const SyntheticOptions& o) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // class signature: base frequency (Hz), per-channel amplitude and offset
    struct Signature {
        double freq;
        std::array<double, kChannels> amp, offset;
    };
    std::array<Signature, kClasses> sig{};
    for (std::size_t c = 0; c < kClasses; ++c) {
        sig[c].freq = c == 0 ? 0.0 : 0.25 + 0.3 * static_cast<double>(c);
        for (std::size_t ch = 0; ch < kChannels; ++ch) {
            sig[c].amp[ch] = c == 0 ? 0.0 : 0.5 + 2.0 * unit(rng);
            sig[c].offset[ch] = c == 0 ? 0.0 : 2.0 * unit(rng) - 1.0;
        }
    }
    std::vector<Recording> out;
    for (int s = 1; s <= o.subjects; ++s) {
        const double gain = 0.85 + 0.3 * unit(rng);
        for (int sess = 1; sess <= o.sessions; ++sess) {
            Recording rec;
            rec.subject = s;
            rec.session = sess;
            std::vector<int> order;
            for (int c = 1; c < static_cast<int>(kClasses); ++c) order.push_back(c);
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
            std::size_t t = 0;
            auto emit = [&](int label, std::size_t len) {
                const double phase = 2.0 * std::numbers::pi * unit(rng);
                for (std::size_t i = 0; i < len; ++i, ++t) {
                    SampleRecord r;
                    r.timestamp = static_cast<double>(t) / kSampleRateHz;
                    r.label = label;
                    r.subject = s;
                    r.session = sess;
                    std::array<float, kChannels> v{};
                    const double time = static_cast<double>(i) / kSampleRateHz;
                    for (std::size_t ch = 0; ch < kChannels; ++ch) {
                        const auto& g = sig[static_cast<std::size_t>(label)];
                        const double wave =
                            std::sin(2.0 * std::numbers::pi * g.freq * (1.0 + 0.1 * static_cast<double>(ch)) * time +
                                     phase + static_cast<double>(ch));
                        v[ch] = static_cast<float>(gain * (g.amp[ch] * wave + g.offset[ch]) + o.noise * gauss(rng));
                    }
                    r.acc = {v[0], v[1], v[2]};
                    r.gyro = {v[3], v[4], v[5]};
                    r.hbc = v[6];
                    rec.samples.push_back(r);
                }
            };
            for (int c : order) {
                emit(0, o.null_len);
                emit(c, o.exercise_len);
            }
            emit(0, o.null_len);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

inline void write_csv(std::ostream& os, const std::vector<Recording>& recs) {
    os << "timestamp,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z,hbc,label,subject,session\n";
    os.precision(9);
    for (const auto& r : recs)
        for (const auto& s : r.samples)
            os << s.timestamp << "," << s.acc[0] << "," << s.acc[1] << "," << s.acc[2] << "," << s.gyro[0] << ","
               << s.gyro[1] << "," << s.gyro[2] << "," << s.hbc << "," << s.label << "," << s.subject << ","
               << s.session << "\n";
}

/// Windows of two easily separated classes (constant +1 vs -1 on every
/// channel plus small noise), alternating labels, weight 1.
inline std::vector<Window> separable_windows(std::size_t count, std::uint64_t seed, int class_a = 1,
                                             int class_b = 2) {
    std::mt19937_64 rng(seed);
    std::vector<Window> out;
    for (std::size_t i = 0; i < count; ++i) {
        Window w;
        w.label = i % 2 ? class_b : class_a;
        const float level = i % 2 ? -1.0f : 1.0f;
        for (float& v : w.data.data()) v = level + static_cast<float>(0.2 * (unit(rng) - 0.5));
        w.subject = 1 + static_cast<int>(i % 4);
        w.session = 1;
        w.sample_labels.assign(kWindowSize, static_cast<std::uint8_t>(w.label));
        out.push_back(std::move(w));
    }
    return out;
}

/// Windows of i.i.d. N(0, 1) values.
inline std::vector<Window> random_windows(std::size_t count, std::uint64_t seed, std::size_t seq_len = kWindowSize) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::vector<Window> out;
    for (std::size_t i = 0; i < count; ++i) {
        Window w;
        w.data = Tensor({kChannels, seq_len});
        for (float& v : w.data.data()) v = gauss(rng);
        w.label = static_cast<int>(rng() % kClasses);
        w.weight = 0.5f + static_cast<float>(unit(rng));
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace edgefit::testkit
