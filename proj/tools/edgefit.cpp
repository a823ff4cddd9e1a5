// edgefit command-line driver: prepare / train / quantize / eval / bench / report.

#include <CLI11.hpp>

#include <cstdio>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "edgefit/edgefit.hpp"

namespace fs = std::filesystem;
using namespace edgefit;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidConfig:
            return kUsage;
        case ErrorKind::NonFiniteInput:
        case ErrorKind::AllZeroTensor:
        case ErrorKind::MissingCalibration:
        case ErrorKind::AccumulatorOverflow:
            return kNumeric;
        default:
            return kData;
    }
}

struct Options {
    std::string dataset;
    std::string fold = "all";
    std::string model;
    std::string profiles;
    std::string baseline;
    std::string out;
    std::string format = "text";
    std::uint64_t seed = 0;
    std::size_t stride = kDefaultStride;
    std::size_t width = 52;
    std::size_t runs = 100;
    Hyperparams hp;
};

bool kv(const Options& o) { return o.format == "kv"; }

std::optional<int> fold_subject(const std::string& fold) {
    if (fold == "all") return std::nullopt;
    const auto v = detail::parse_number<int>(fold);
    if (!v || *v < 1) fail(ErrorKind::InvalidConfig, "--fold must be a subject id or \"all\", got '" + fold + "'");
    return *v;
}

int required_fold(const Options& o) {
    const auto s = fold_subject(o.fold);
    if (!s) fail(ErrorKind::InvalidConfig, "this subcommand needs --fold <subject id>");
    return *s;
}

void require_out(const Options& o) {
    if (o.out.empty()) fail(ErrorKind::InvalidConfig, "--out is required");
}

DatasetSplit split_for(std::vector<Window> windows, int subject) {
    DatasetSplit s;
    s.held_out_subject = subject;
    for (auto& w : windows) (w.subject == subject ? s.test : s.train).push_back(std::move(w));
    return s;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

// "windows.efw" + 3 -> "windows.s3.efw"
fs::path fold_path(const fs::path& p, int subject) {
    fs::path out = p;
    out.replace_filename(p.stem().string() + ".s" + std::to_string(subject) + p.extension().string());
    return out;
}

void write_manifest(const fs::path& path, const PreparedFold& f, std::size_t stride) {
    std::ofstream m(path);
    if (!m) fail(ErrorKind::CorruptFile, "cannot write '" + path.string() + "'");
    std::size_t train = 0, test = 0;
    for (const auto& w : f.windows) ++(w.subject == f.held_out_subject ? test : train);
    m.precision(9);
    m << "held_out_subject=" << f.held_out_subject << "\n"
      << "window_size=" << kWindowSize << "\n"
      << "stride=" << stride << "\n"
      << "train_windows=" << train << "\n"
      << "test_windows=" << test << "\n";
    for (std::size_t c = 0; c < kChannels; ++c)
        m << "norm.mean." << c << "=" << f.stats.mean[c] << "\n"
          << "norm.std." << c << "=" << f.stats.std[c] << "\n";
    for (std::size_t k = 0; k < kClasses; ++k) m << "class_freq." << kClassNames[k] << "=" << f.class_freq[k] << "\n";
}

int cmd_prepare(const Options& o) {
    require_out(o);
    if (o.dataset.empty()) fail(ErrorKind::InvalidConfig, "--dataset is required");
    if (o.stride == 0) fail(ErrorKind::InvalidConfig, "--stride must be >= 1");
    const auto recordings = load_recordings(o.dataset);
    std::set<int> subjects;
    for (const auto& r : recordings) subjects.insert(r.subject);
    if (subjects.size() < 2) fail(ErrorKind::FewerThanTwoSubjects, "leave-one-user-out needs at least two subjects");

    std::vector<int> folds;
    if (const auto s = fold_subject(o.fold)) {
        if (!subjects.count(*s)) fail(ErrorKind::EmptyTestSet, "subject " + o.fold + " not present in the dataset");
        folds.push_back(*s);
    } else {
        folds.assign(subjects.begin(), subjects.end());
    }
    for (int s : folds) {
        const PreparedFold f = prepare_fold(recordings, s, o.stride);
        const fs::path path = folds.size() == 1 && fold_subject(o.fold) ? fs::path(o.out) : fold_path(o.out, s);
        save_windows(path, f.windows);
        write_manifest(with_suffix(path, ".manifest"), f, o.stride);
        if (kv(o))
            std::cout << "fold." << s << ".path=" << path.string() << "\nfold." << s << ".windows=" << f.windows.size()
                      << "\n";
        else
            std::cout << "subject " << s << ": " << f.windows.size() << " windows -> " << path.string() << "\n";
    }
    return kOk;
}

int cmd_train(const Options& o) {
    require_out(o);
    const int subject = required_fold(o);
    const DatasetSplit split = split_for(load_windows(o.dataset), subject);
    ModelConfig cfg;
    cfg.width = o.width;
    const TrainResult r = train_fold(split, cfg, o.hp, o.seed);
    save(r.model, o.out);
    std::ofstream hist(with_suffix(o.out, ".history.csv"));
    if (!hist) fail(ErrorKind::CorruptFile, "cannot write history next to '" + o.out + "'");
    write_history_csv(hist, r.history);

    const auto& last = r.history.epochs.back();
    if (kv(o)) {
        std::cout << "epochs_run=" << r.history.epochs.size() << "\nbest_epoch=" << r.history.best_epoch
                  << "\nstopped_early=" << (r.history.stopped_early ? 1 : 0) << "\nfinal_train_loss=" << last.train_loss
                  << "\n";
    } else {
        std::cout << "trained " << r.history.epochs.size() << " epochs (best " << r.history.best_epoch
                  << (r.history.stopped_early ? ", stopped early" : "") << "), final train loss " << last.train_loss
                  << "\n";
    }
    if (!split.test.empty()) {
        const Metrics m = evaluate(r.model, split.test);
        std::cout << (kv(o) ? "test_balanced_accuracy=" : "held-out balanced accuracy ") << m.balanced_accuracy
                  << "\n";
    }
    return kOk;
}

int cmd_quantize(const Options& o) {
    require_out(o);
    const ModelParams m = load(o.model);
    auto windows = load_windows(o.dataset);
    // calibrate on training subjects only when a fold is named
    if (const auto s = fold_subject(o.fold)) windows = split_for(std::move(windows), *s).train;
    const QuantModel q = quantize_pipeline(m, windows, o.seed);
    save_quant(q, o.out);
    std::cout << (kv(o) ? "quantized=" : "quantized model -> ") << o.out << "\n";
    return kOk;
}

std::string file_magic(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorKind::CorruptFile, "cannot open '" + p.string() + "'");
    char buf[4] = {};
    in.read(buf, 4);
    if (in.gcount() != 4) fail(ErrorKind::CorruptFile, "'" + p.string() + "' is too short to be a model");
    return std::string(buf, 4);
}

struct AnyModel {
    std::optional<ModelParams> f;
    std::optional<QuantModel> q;

    Tensor infer(const Tensor& x) const { return f ? forward(*f, x) : qforward(*q, x); }
    ModelConfig config() const { return f ? f->config : q->config; }
};

AnyModel load_any(const std::string& path) {
    if (path.empty()) fail(ErrorKind::InvalidConfig, "--model is required");
    AnyModel m;
    if (file_magic(path) == "EFQ1")
        m.q = load_quant(path);
    else
        m.f = load(path);
    return m;
}

int cmd_eval(const Options& o) {
    const AnyModel model = load_any(o.model);
    auto windows = load_windows(o.dataset);
    if (const auto s = fold_subject(o.fold)) windows = split_for(std::move(windows), *s).test;
    const Metrics m = evaluate_with(windows, [&](const Window& w) { return model.infer(w.data); });
    if (kv(o)) {
        std::cout.precision(9);
        std::cout << "windows=" << m.count << "\nbalanced_accuracy=" << m.balanced_accuracy << "\nloss=" << m.loss
                  << "\n";
    } else {
        write_metrics(std::cout, m);
    }
    return kOk;
}

int cmd_bench(const Options& o) {
    const AnyModel model = load_any(o.model);
    const ModelConfig cfg = model.config();
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<float> g(0.0f, 1.0f);
    Tensor x({cfg.in_channels, cfg.seq_len});
    for (float& v : x.data()) v = g(rng);
    const std::uint64_t macs = count_macs(cfg).total;
    volatile float sink = 0.0f;
    const BenchResult b = host_bench([&] { sink = sink + model.infer(x)[0]; }, macs, o.runs);
    const RealtimeCheck rt = realtime_check(b.median_ms, o.stride);
    if (kv(o)) {
        std::cout.precision(9);
        std::cout << "runs=" << b.runs << "\nmedian_ms=" << b.median_ms << "\nmin_ms=" << b.min_ms
                  << "\nmax_ms=" << b.max_ms << "\nthroughput_mmacs=" << b.throughput_mmacs << "\nmacs=" << macs
                  << "\nrealtime_feasible=" << (rt.feasible ? 1 : 0) << "\nrealtime_margin=" << rt.margin << "\n";
    } else {
        std::cout << (model.q ? "int8" : "float32") << " model, " << macs << " MACs, " << b.runs << " runs\n"
                  << "median " << b.median_ms << " ms (min " << b.min_ms << ", max " << b.max_ms << ")\n"
                  << "throughput " << b.throughput_mmacs << " MMAC/s\n"
                  << "real-time at stride " << o.stride << ": " << (rt.feasible ? "feasible" : "NOT feasible")
                  << " (budget " << rt.budget_ms << " ms, margin " << rt.margin << "x)\n";
    }
    return kOk;
}

int cmd_report(const Options& o) {
    const auto profiles = o.profiles.empty() ? builtin_profiles() : load_profiles(o.profiles);
    if (kv(o)) {
        print_platform_kv(std::cout, profiles);
    } else {
        print_platform_table(std::cout, profiles);
        std::cout << "\n";
    }
    if (profiles.size() >= 2) {
        // default baseline: the fastest profile
        std::size_t base = 0;
        for (std::size_t i = 1; i < profiles.size(); ++i)
            if (profiles[i].time_per_inference_ms < profiles[base].time_per_inference_ms) base = i;
        if (!o.baseline.empty()) {
            const auto it = std::find_if(profiles.begin(), profiles.end(),
                                         [&](const PlatformProfile& p) { return p.name == o.baseline; });
            if (it == profiles.end()) fail(ErrorKind::InvalidConfig, "no profile named '" + o.baseline + "'");
            base = static_cast<std::size_t>(it - profiles.begin());
        }
        const SpeedupReport s = speedup_table(profiles, base);
        if (kv(o)) {
            for (const auto& r : s.rows) std::cout << r.name << ".speedup=" << r.speedup << "\n";
        } else {
            print_speedups(std::cout, s);
            std::cout << "\n";
        }
    }
    for (const auto& p : profiles) {
        const RealtimeCheck rt = realtime_check(p.time_per_inference_ms, o.stride);
        if (kv(o))
            std::cout << p.name << ".realtime_feasible=" << (rt.feasible ? 1 : 0) << "\n";
        else
            std::cout << "real-time " << p.name << ": " << (rt.feasible ? "feasible" : "NOT feasible") << " (margin "
                      << std::fixed << std::setprecision(1) << rt.margin << "x)\n" << std::defaultfloat;
    }
    return kOk;
}

void add_format(CLI::App* c, Options& o) {
    c->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"text", "kv"}))->capture_default_str();
}

void add_hyper(CLI::App* c, Options& o) {
    c->add_option("--epochs", o.hp.epochs, "Maximum training epochs")->capture_default_str();
    c->add_option("--patience", o.hp.patience, "Early-stopping patience in epochs")->capture_default_str();
    c->add_option("--batch-size", o.hp.batch_size, "Mini-batch size")->capture_default_str();
    c->add_option("--lr", o.hp.lr, "Adam learning rate")->capture_default_str();
    c->add_option("--width", o.width, "Channel width C")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"edgefit: train, quantize and size a residual 1D-CNN for wearable activity recognition"};
    app.require_subcommand(1);
    Options o;

    auto* prepare = app.add_subcommand("prepare", "Ingest CSV recordings, window them and write per-fold containers");
    prepare->add_option("--dataset", o.dataset, "CSV file or directory of CSV files")->required();
    prepare->add_option("--fold", o.fold, "Held-out subject id, or \"all\"")->capture_default_str();
    prepare->add_option("--stride", o.stride, "Window stride in samples")->capture_default_str();
    prepare->add_option("--out", o.out, "Output window container (per-fold files get .s<id> inserted)")->required();
    add_format(prepare, o);

    auto* train = app.add_subcommand("train", "Train one leave-one-user-out fold");
    train->add_option("--dataset", o.dataset, "Window container from prepare")->required();
    train->add_option("--fold", o.fold, "Held-out subject id")->required();
    train->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    add_hyper(train, o);
    train->add_option("--out", o.out, "Output model file (history goes to <out>.history.csv)")->required();
    add_format(train, o);

    auto* quantize = app.add_subcommand("quantize", "Fold BN, calibrate and quantize a model to int8");
    quantize->add_option("--model", o.model, "Float model file")->required();
    quantize->add_option("--dataset", o.dataset, "Window container used for calibration")->required();
    quantize->add_option("--fold", o.fold, "Held-out subject excluded from calibration, or \"all\"")
        ->capture_default_str();
    quantize->add_option("--seed", o.seed, "Calibration sampling seed")->capture_default_str();
    quantize->add_option("--out", o.out, "Output quantized model file")->required();
    add_format(quantize, o);

    auto* eval = app.add_subcommand("eval", "Evaluate a float or int8 model");
    eval->add_option("--model", o.model, "Model file (float or quantized)")->required();
    eval->add_option("--dataset", o.dataset, "Window container")->required();
    eval->add_option("--fold", o.fold, "Evaluate only this subject's windows, or \"all\"")->capture_default_str();
    add_format(eval, o);

    auto* bench = app.add_subcommand("bench", "Time single-window inference on this host");
    bench->add_option("--model", o.model, "Model file (float or quantized)")->required();
    bench->add_option("--runs", o.runs, "Timed runs (>= 10)")->capture_default_str();
    bench->add_option("--stride", o.stride, "Window stride for the real-time check")->capture_default_str();
    bench->add_option("--seed", o.seed, "Seed for the random input")->capture_default_str();
    add_format(bench, o);

    auto* report = app.add_subcommand("report", "Derived platform metrics and speedups");
    report->add_option("--profiles", o.profiles, "Profile CSV (name,clock_hz,power_mw,time_ms,mac_count)");
    report->add_option("--baseline", o.baseline, "Profile name to compare against (default: fastest)");
    report->add_option("--stride", o.stride, "Window stride for the real-time check")->capture_default_str();
    add_format(report, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*prepare) return cmd_prepare(o);
        if (*train) return cmd_train(o);
        if (*quantize) return cmd_quantize(o);
        if (*eval) return cmd_eval(o);
        if (*bench) return cmd_bench(o);
        if (*report) return cmd_report(o);
    } catch (const Error& e) {
        std::cerr << "edgefit: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "edgefit: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
