#pragma once

// Gym-workout sensor data: CSV ingestion, z-score normalization, fixed-size
// windowing with majority labels and inverse-frequency weights, and
// leave-one-user-out fold construction. Also the EFW1 window container.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "edgefit/binary_io.hpp"
#include "edgefit/error.hpp"
#include "edgefit/tensor.hpp"

namespace edgefit {

inline constexpr std::size_t kChannels = 7;
inline constexpr std::size_t kWindowSize = 40;
inline constexpr std::size_t kClasses = 12;
inline constexpr std::size_t kDefaultStride = 20;
inline constexpr double kSampleRateHz = 20.0;
inline constexpr float kStdFloor = 1e-6f;
inline constexpr int kNullClass = 0;

inline constexpr std::array<std::string_view, kClasses> kClassNames = {
    "Null",     "Adductor", "Armcurl", "Benchpress",   "Legcurl",       "Legpress",
    "Riding",   "Ropeskipping", "Running", "Squat", "Stairsclimber", "Walking"};

inline std::optional<int> class_id(std::string_view name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i)
        if (kClassNames[i] == name) return static_cast<int>(i);
    return std::nullopt;
}

struct SampleRecord {
    double timestamp = 0.0;
    std::array<float, 3> acc{};
    std::array<float, 3> gyro{};
    float hbc = 0.0f;
    int label = 0;
    int subject = 1;
    int session = 1;

    // acc_x, acc_y, acc_z, gyro_x, gyro_y, gyro_z, hbc
    std::array<float, kChannels> channels() const {
        return {acc[0], acc[1], acc[2], gyro[0], gyro[1], gyro[2], hbc};
    }
};

struct Recording {
    int subject = 1;
    int session = 1;
    double rate_hz = kSampleRateHz;
    std::vector<SampleRecord> samples;
};

struct NormStats {
    std::array<float, kChannels> mean{};
    std::array<float, kChannels> std{};
    std::array<bool, kChannels> clamped{};  // std was below the floor
};

struct Window {
    Tensor data = Tensor({kChannels, kWindowSize});  // normalized, [channel x time]
    int label = 0;
    float weight = 1.0f;
    int subject = 1;
    int session = 1;
    // Per-sample labels backing `label` and `weight`; not serialized.
    std::vector<std::uint8_t> sample_labels;
};

struct DatasetSplit {
    std::vector<Window> train;
    std::vector<Window> test;
    int held_out_subject = 0;
};

/// Header names to look up for each canonical column. The defaults are the
/// canonical names themselves.
struct ColumnMap {
    std::string timestamp = "timestamp";
    std::string acc_x = "acc_x", acc_y = "acc_y", acc_z = "acc_z";
    std::string gyro_x = "gyro_x", gyro_y = "gyro_y", gyro_z = "gyro_z";
    std::string hbc = "hbc";
    std::string label = "label";
    std::string subject = "subject";
    std::string session = "session";

    std::array<const std::string*, 11> ordered() const {
        return {&timestamp, &acc_x, &acc_y, &acc_z, &gyro_x, &gyro_y, &gyro_z, &hbc, &label, &subject, &session};
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
inline std::optional<T> parse_number(std::string_view s) {
    T value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) return std::nullopt;
    }
    return value;
}

inline std::optional<int> parse_label(std::string_view s) {
    if (auto id = parse_number<int>(s)) {
        if (*id >= 0 && *id < static_cast<int>(kClasses)) return id;
        return std::nullopt;
    }
    return class_id(s);
}

inline void parse_csv_into(std::istream& in, const std::string& source, const ColumnMap& schema,
                           std::map<std::pair<int, int>, Recording>& groups) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::EmptyDataset, source + " has no header row");
    const auto header = split_fields(line);
    std::array<std::size_t, 11> col{};
    const auto wanted = schema.ordered();
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        const auto it = std::find(header.begin(), header.end(), std::string_view(*wanted[i]));
        if (it == header.end()) fail(ErrorKind::MissingColumn, source + " lacks column '" + *wanted[i] + "'");
        col[i] = static_cast<std::size_t>(it - header.begin());
    }
    const std::size_t needed = *std::max_element(col.begin(), col.end()) + 1;

    std::size_t row = 0;
    for (; std::getline(in, line); ++row) {
        if (trim(line).empty()) continue;
        const auto f = split_fields(line);
        if (f.size() < needed) throw MalformedRowError(row, source + ": too few fields");
        SampleRecord s;
        const auto ts = parse_number<double>(f[col[0]]);
        if (!ts) throw MalformedRowError(row, source + ": bad timestamp");
        s.timestamp = *ts;
        std::array<float, kChannels> ch{};
        for (std::size_t c = 0; c < kChannels; ++c) {
            const auto v = parse_number<float>(f[col[1 + c]]);
            if (!v) throw MalformedRowError(row, source + ": bad value in column '" + *wanted[1 + c] + "'");
            ch[c] = *v;
        }
        s.acc = {ch[0], ch[1], ch[2]};
        s.gyro = {ch[3], ch[4], ch[5]};
        s.hbc = ch[6];
        const auto label = parse_label(f[col[8]]);
        if (!label) throw MalformedRowError(row, source + ": label outside 0..11");
        s.label = *label;
        const auto subject = parse_number<int>(f[col[9]]);
        if (!subject || *subject < 1 || *subject > 10)
            throw MalformedRowError(row, source + ": subject outside 1..10");
        const auto session = parse_number<int>(f[col[10]]);
        if (!session || *session < 1 || *session > 5)
            throw MalformedRowError(row, source + ": session outside 1..5");
        s.subject = *subject;
        s.session = *session;

        Recording& rec = groups[{s.subject, s.session}];
        rec.subject = s.subject;
        rec.session = s.session;
        if (!rec.samples.empty() && !(s.timestamp > rec.samples.back().timestamp))
            throw MalformedRowError(row, source + ": timestamp not strictly increasing within session");
        rec.samples.push_back(s);
    }
}

}  // namespace detail

/// Reads one CSV file, or every *.csv in a directory (by filename order).
/// Returns one Recording per (subject, session), ordered by that pair.
inline std::vector<Recording> load_recordings(const std::filesystem::path& path, const ColumnMap& schema = {}) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) fail(ErrorKind::EmptyDataset, "dataset path '" + path.string() + "' does not exist");
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    std::map<std::pair<int, int>, Recording> groups;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) fail(ErrorKind::EmptyDataset, "cannot open '" + f.string() + "'");
        detail::parse_csv_into(in, f.string(), schema, groups);
    }
    std::vector<Recording> out;
    for (auto& [key, rec] : groups) out.push_back(std::move(rec));
    if (out.empty()) fail(ErrorKind::EmptyDataset, "no samples found under '" + path.string() + "'");
    return out;
}

/// Same as load_recordings but from an in-memory CSV document.
inline std::vector<Recording> parse_recordings(std::string_view csv, const ColumnMap& schema = {}) {
    std::istringstream in{std::string(csv)};
    std::map<std::pair<int, int>, Recording> groups;
    detail::parse_csv_into(in, "<memory>", schema, groups);
    std::vector<Recording> out;
    for (auto& [key, rec] : groups) out.push_back(std::move(rec));
    if (out.empty()) fail(ErrorKind::EmptyDataset, "no samples");
    return out;
}

/// Per-channel mean and population standard deviation over every sample of
/// `recordings`; std below 1e-6 is clamped to 1e-6.
inline NormStats compute_norm_stats(std::span<const Recording> recordings) {
    std::array<double, kChannels> sum{}, sq{};
    std::size_t n = 0;
    for (const auto& r : recordings)
        for (const auto& s : r.samples) {
            const auto ch = s.channels();
            for (std::size_t c = 0; c < kChannels; ++c) sum[c] += ch[c];
            ++n;
        }
    if (n == 0) fail(ErrorKind::EmptyDataset, "cannot compute normalization statistics of zero samples");
    std::array<double, kChannels> mean{};
    for (std::size_t c = 0; c < kChannels; ++c) mean[c] = sum[c] / static_cast<double>(n);
    // second pass for numerical stability
    for (const auto& r : recordings)
        for (const auto& s : r.samples) {
            const auto ch = s.channels();
            for (std::size_t c = 0; c < kChannels; ++c) sq[c] += (ch[c] - mean[c]) * (ch[c] - mean[c]);
        }
    NormStats st;
    for (std::size_t c = 0; c < kChannels; ++c) {
        st.mean[c] = static_cast<float>(mean[c]);
        const auto sd = static_cast<float>(std::sqrt(sq[c] / static_cast<double>(n)));
        st.clamped[c] = sd < kStdFloor;
        st.std[c] = st.clamped[c] ? kStdFloor : sd;
    }
    return st;
}

/// Majority label; ties go to the lowest non-Null class among the tied.
inline int label_window(std::span<const std::uint8_t> labels) {
    std::array<std::size_t, kClasses> counts{};
    for (auto l : labels) ++counts.at(l);
    const std::size_t best = *std::max_element(counts.begin(), counts.end());
    for (std::size_t c = 1; c < kClasses; ++c)
        if (counts[c] == best) return static_cast<int>(c);
    return kNullClass;
}

/// Mean over the window's samples of N_total / (K * N_label), where K is the
/// number of classes (`class_freq.size()`).
inline float window_weight(std::span<const std::uint8_t> labels, std::span<const std::size_t> class_freq) {
    const double total = static_cast<double>(std::accumulate(class_freq.begin(), class_freq.end(), std::size_t{0}));
    const double k = static_cast<double>(class_freq.size());
    double acc = 0.0;
    for (auto l : labels) {
        if (l >= class_freq.size() || class_freq[l] == 0)
            fail(ErrorKind::UnseenLabel, "label " + std::to_string(l) + " never occurs in the training labels");
        acc += total / (k * static_cast<double>(class_freq[l]));
    }
    return static_cast<float>(acc / static_cast<double>(labels.size()));
}

/// Per-class sample counts over every sample of `recordings`.
inline std::array<std::size_t, kClasses> class_frequencies(std::span<const Recording> recordings) {
    std::array<std::size_t, kClasses> counts{};
    for (const auto& r : recordings)
        for (const auto& s : r.samples) ++counts.at(static_cast<std::size_t>(s.label));
    return counts;
}

inline std::size_t window_count(std::size_t len, std::size_t size, std::size_t stride) {
    return len < size ? 0 : (len - size) / stride + 1;
}

/// Cuts `rec` into z-normalized windows of `size` samples every `stride`
/// samples. Weights are left at 1; see assign_weights.
inline std::vector<Window> segment_windows(const Recording& rec, const NormStats& stats,
                                           std::size_t size = kWindowSize, std::size_t stride = kDefaultStride) {
    if (size != kWindowSize) fail(ErrorKind::InvalidConfig, "window size must be 40");
    if (stride == 0) fail(ErrorKind::InvalidConfig, "window stride must be >= 1");
    const std::size_t n = window_count(rec.samples.size(), size, stride);
    std::vector<Window> out;
    out.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        Window win;
        win.subject = rec.subject;
        win.session = rec.session;
        win.sample_labels.resize(size);
        for (std::size_t t = 0; t < size; ++t) {
            const auto& s = rec.samples[w * stride + t];
            const auto ch = s.channels();
            for (std::size_t c = 0; c < kChannels; ++c) win.data.at(c, t) = (ch[c] - stats.mean[c]) / stats.std[c];
            win.sample_labels[t] = static_cast<std::uint8_t>(s.label);
        }
        win.label = label_window(win.sample_labels);
        out.push_back(std::move(win));
    }
    return out;
}

inline void assign_weights(std::span<Window> windows, std::span<const std::size_t> class_freq) {
    for (auto& w : windows) w.weight = window_weight(w.sample_labels, class_freq);
}

/// One fold per distinct subject (ascending): test = that subject's windows.
inline std::vector<DatasetSplit> loucv_splits(std::span<const Window> windows) {
    std::set<int> subjects;
    for (const auto& w : windows) subjects.insert(w.subject);
    if (subjects.size() < 2)
        fail(ErrorKind::FewerThanTwoSubjects, "leave-one-user-out needs at least two subjects, got " +
                                                  std::to_string(subjects.size()));
    std::vector<DatasetSplit> folds;
    for (int s : subjects) {
        DatasetSplit split;
        split.held_out_subject = s;
        for (const auto& w : windows) (w.subject == s ? split.test : split.train).push_back(w);
        folds.push_back(std::move(split));
    }
    return folds;
}

/// Windows for one leave-one-user-out fold, normalized and weighted with
/// statistics from the training subjects only. Test windows keep weight 1.
struct PreparedFold {
    int held_out_subject = 0;
    NormStats stats;
    std::array<std::size_t, kClasses> class_freq{};
    std::vector<Window> windows;  // train and test, ordered by (subject, session)
};

inline PreparedFold prepare_fold(std::span<const Recording> recordings, int held_out_subject,
                                 std::size_t stride = kDefaultStride) {
    std::vector<Recording> train;
    for (const auto& r : recordings)
        if (r.subject != held_out_subject) train.push_back(r);
    if (train.empty()) fail(ErrorKind::EmptyTrainSet, "no training recordings for held-out subject " +
                                                          std::to_string(held_out_subject));
    PreparedFold fold;
    fold.held_out_subject = held_out_subject;
    fold.stats = compute_norm_stats(train);
    fold.class_freq = class_frequencies(train);
    for (const auto& r : recordings) {
        auto ws = segment_windows(r, fold.stats, kWindowSize, stride);
        if (r.subject != held_out_subject) assign_weights(ws, fold.class_freq);
        for (auto& w : ws) fold.windows.push_back(std::move(w));
    }
    return fold;
}

// ---- EFW1 window container ------------------------------------------------
// header: "EFW1", u32 count, u32 channels (7), u32 length (40)
// record: 40x7 f32 (time-major), u8 label, f32 weight, u8 subject, u8 session

inline void write_windows(std::ostream& out, std::span<const Window> windows) {
    io::Writer w(out);
    w.magic("EFW1");
    w.u32(static_cast<std::uint32_t>(windows.size()));
    w.u32(kChannels);
    w.u32(kWindowSize);
    for (const auto& win : windows) {
        for (std::size_t t = 0; t < kWindowSize; ++t)
            for (std::size_t c = 0; c < kChannels; ++c) w.f32(win.data.at(c, t));
        w.u8(static_cast<std::uint8_t>(win.label));
        w.f32(win.weight);
        w.u8(static_cast<std::uint8_t>(win.subject));
        w.u8(static_cast<std::uint8_t>(win.session));
    }
}

inline std::vector<Window> read_windows(std::istream& in) {
    io::Reader r(in);
    r.expect_magic("EFW1");
    const std::uint32_t count = r.u32();
    if (r.u32() != kChannels || r.u32() != kWindowSize)
        fail(ErrorKind::CorruptFile, "window container geometry is not 7x40");
    std::vector<Window> out;
    out.reserve(std::min<std::uint32_t>(count, 1u << 20));
    for (std::uint32_t i = 0; i < count; ++i) {
        Window win;
        for (std::size_t t = 0; t < kWindowSize; ++t)
            for (std::size_t c = 0; c < kChannels; ++c) win.data.at(c, t) = r.f32();
        win.label = r.u8();
        win.weight = r.f32();
        win.subject = r.u8();
        win.session = r.u8();
        if (win.label >= static_cast<int>(kClasses) || !(win.weight > 0.0f) || !win.data.all_finite())
            fail(ErrorKind::CorruptFile, "window record " + std::to_string(i) + " violates its invariants");
        win.sample_labels.assign(kWindowSize, static_cast<std::uint8_t>(win.label));
        out.push_back(std::move(win));
    }
    return out;
}

inline void save_windows(const std::filesystem::path& path, std::span<const Window> windows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::CorruptFile, "cannot write '" + path.string() + "'");
    write_windows(out, windows);
}

inline std::vector<Window> load_windows(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::CorruptFile, "cannot open '" + path.string() + "'");
    return read_windows(in);
}

}  // namespace edgefit
