#pragma once

// Residual 1D-CNN for 7x40 sensor windows: a stem convolution, identity
// blocks of conv/BN layers with skip connections, and a flatten+dense head.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "edgefit/binary_io.hpp"
#include "edgefit/error.hpp"
#include "edgefit/tensor.hpp"

namespace edgefit {

struct ModelConfig {
    std::size_t in_channels = 7;
    std::size_t seq_len = 40;
    std::size_t classes = 12;
    std::size_t width = 52;
    std::size_t kernel = 3;
    std::size_t blocks = 3;
    std::size_t convs_per_block = 3;
    float bn_eps = 1e-3f;

    void validate() const {
        if (in_channels != 7) fail(ErrorKind::InvalidConfig, "in_channels must be 7");
        if (classes != 12) fail(ErrorKind::InvalidConfig, "classes must be 12");
        if (seq_len == 0) fail(ErrorKind::InvalidConfig, "seq_len must be >= 1");
        if (width == 0) fail(ErrorKind::InvalidConfig, "width must be >= 1");
        if (kernel % 2 == 0) fail(ErrorKind::InvalidConfig, "kernel must be odd");
        if (convs_per_block == 0) fail(ErrorKind::InvalidConfig, "convs_per_block must be >= 1");
        if (!(bn_eps >= 0.0f) || !std::isfinite(bn_eps)) fail(ErrorKind::InvalidConfig, "bn_eps must be >= 0");
    }

    std::size_t flat_features() const { return width * seq_len; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct BatchNorm {
    Tensor gamma, beta, mean, var;

    static BatchNorm identity(std::size_t c) {
        return {Tensor::filled({c}, 1.0f), Tensor({c}), Tensor({c}), Tensor::filled({c}, 1.0f)};
    }
    friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

struct ConvLayer {
    Tensor weight;  // [C_out x C_in x K]
    Tensor bias;    // [C_out]
    BatchNorm bn;

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct ModelParams {
    ModelConfig config;
    ConvLayer stem;
    std::vector<std::vector<ConvLayer>> blocks;  // [blocks][convs_per_block]
    Tensor head_weight;                          // [classes x width*seq_len]
    Tensor head_bias;                            // [classes]
    bool folded = false;                         // BN absorbed into conv weights

    /// Calls f(tensor&) for every parameter tensor in declaration order.
    template <typename Self, typename F>
    static void visit(Self& m, F&& f) {
        auto layer = [&](auto& l) {
            f(l.weight);
            f(l.bias);
            f(l.bn.gamma);
            f(l.bn.beta);
            f(l.bn.mean);
            f(l.bn.var);
        };
        layer(m.stem);
        for (auto& block : m.blocks)
            for (auto& l : block) layer(l);
        f(m.head_weight);
        f(m.head_bias);
    }
    template <typename F> void for_each_tensor(F&& f) { visit(*this, f); }
    template <typename F> void for_each_tensor(F&& f) const { visit(*this, f); }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

namespace detail {

/// Deterministic across standard libraries (unlike std::uniform_real_distribution).
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (float& v : t.data()) v = static_cast<float>((2.0 * uniform01(rng) - 1.0) * bound);
    return t;
}

inline ConvLayer make_conv(std::size_t c_out, std::size_t c_in, std::size_t k, std::mt19937_64& rng) {
    return {he_uniform({c_out, c_in, k}, c_in * k, rng), Tensor({c_out}), BatchNorm::identity(c_out)};
}

}  // namespace detail

/// He-uniform weights, zero biases, identity BN; a pure function of (config, seed).
inline ModelParams build(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    ModelParams m;
    m.config = config;
    const std::size_t c = config.width, k = config.kernel;
    m.stem = detail::make_conv(c, config.in_channels, k, rng);
    m.blocks.resize(config.blocks);
    for (auto& block : m.blocks)
        for (std::size_t j = 0; j < config.convs_per_block; ++j) block.push_back(detail::make_conv(c, c, k, rng));
    m.head_weight = detail::he_uniform({config.classes, config.flat_features()}, config.flat_features(), rng);
    m.head_bias = Tensor({config.classes});
    return m;
}

// ---- activation indexing -------------------------------------------------
// 0: input, 1: stem output, then per block b the outputs of its convs
// (post-ReLU except the last, which is pre-add) followed by the block output,
// and finally the logits.

inline std::size_t activation_count(const ModelConfig& c) { return 3 + c.blocks * (c.convs_per_block + 1); }
inline std::size_t block_conv_activation(const ModelConfig& c, std::size_t b, std::size_t j) {
    return 2 + b * (c.convs_per_block + 1) + j;
}
inline std::size_t block_output_activation(const ModelConfig& c, std::size_t b) {
    return block_conv_activation(c, b, c.convs_per_block);
}
inline std::size_t logits_activation(const ModelConfig& c) { return activation_count(c) - 1; }

inline std::string activation_name(const ModelConfig& c, std::size_t id) {
    if (id == 0) return "input";
    if (id == 1) return "stem";
    if (id == logits_activation(c)) return "logits";
    const std::size_t b = (id - 2) / (c.convs_per_block + 1), j = (id - 2) % (c.convs_per_block + 1);
    return "block" + std::to_string(b) + (j == c.convs_per_block ? ".out" : ".conv" + std::to_string(j));
}

namespace detail {

inline Tensor apply_conv(const ModelParams& m, const ConvLayer& l, const Tensor& x) {
    Tensor y = conv1d_same(x, l.weight, l.bias);
    if (m.folded) return y;
    return batchnorm_infer(y, l.bn.gamma, l.bn.beta, l.bn.mean, l.bn.var, m.config.bn_eps);
}

}  // namespace detail

/// Inference-mode forward pass; `observe(activation_id, tensor)` sees every
/// intermediate activation in index order.
template <typename Observer>
Tensor forward(const ModelParams& m, const Tensor& x, Observer&& observe) {
    const auto& cfg = m.config;
    if (x.rank() != 2 || x.dim(0) != cfg.in_channels || x.dim(1) != cfg.seq_len)
        fail(ErrorKind::ShapeMismatch, "forward expects input [" + std::to_string(cfg.in_channels) + "x" +
                                           std::to_string(cfg.seq_len) + "], got " + shape_string(x.shape()));
    observe(std::size_t{0}, x);
    Tensor h = relu(detail::apply_conv(m, m.stem, x));
    observe(std::size_t{1}, h);
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        const auto& block = m.blocks[b];
        Tensor y = h;
        for (std::size_t j = 0; j < block.size(); ++j) {
            y = detail::apply_conv(m, block[j], y);
            if (j + 1 < block.size()) y = relu(std::move(y));
            observe(block_conv_activation(cfg, b, j), y);
        }
        h = relu(add(y, h));
        observe(block_output_activation(cfg, b), h);
    }
    Tensor logits = dense(h, m.head_weight, m.head_bias);
    observe(logits_activation(cfg), logits);
    return logits;
}

inline Tensor forward(const ModelParams& m, const Tensor& x) {
    return forward(m, x, [](std::size_t, const Tensor&) {});
}

/// Absorbs each BN into its convolution: w' = w*g/sqrt(v+eps),
/// b' = (b-mu)*g/sqrt(v+eps) + beta. Already-folded models are returned as is.
inline ModelParams fold_batchnorm(const ModelParams& m) {
    if (m.folded) return m;
    ModelParams out = m;
    auto fold = [eps = m.config.bn_eps](ConvLayer& l) {
        const std::size_t c_out = l.weight.dim(0), per_out = l.weight.size() / c_out;
        for (std::size_t o = 0; o < c_out; ++o) {
            const float scale = l.bn.gamma[o] / std::sqrt(l.bn.var[o] + eps);
            for (std::size_t i = 0; i < per_out; ++i) l.weight[o * per_out + i] *= scale;
            l.bias[o] = (l.bias[o] - l.bn.mean[o]) * scale + l.bn.beta[o];
        }
        l.bn = BatchNorm::identity(c_out);
    };
    fold(out.stem);
    for (auto& block : out.blocks)
        for (auto& l : block) fold(l);
    out.folded = true;
    return out;
}

// ---- MAC / memory accounting ---------------------------------------------

struct LayerCost {
    std::string name;
    std::uint64_t macs = 0;
    std::uint64_t params = 0;  // deployable (BN folded) weights + biases
    std::uint64_t out_channels = 0;
};

struct MacReport {
    std::vector<LayerCost> layers;
    std::uint64_t total = 0;
    std::uint64_t param_count = 0;
    std::uint64_t flash_bytes_int8 = 0;
    std::uint64_t peak_activation_bytes = 0;

    double flash_kb() const { return static_cast<double>(flash_bytes_int8) / 1000.0; }
};

/// One MAC per multiply-accumulate of conv and dense layers, enumerated
/// layer by layer. Flash assumes int8 weights plus an int32 bias, multiplier
/// and shift per output channel; peak RAM assumes int8 activations with the
/// block input held for the skip plus two working buffers.
inline MacReport count_macs(const ModelConfig& cfg) {
    cfg.validate();
    MacReport r;
    auto conv = [&](std::string name, std::size_t c_in, std::size_t c_out) {
        LayerCost l{std::move(name), 0, 0, c_out};
        for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t t = 0; t < cfg.seq_len; ++t) l.macs += c_in * cfg.kernel;
        l.params = c_out * c_in * cfg.kernel + c_out;
        r.layers.push_back(l);
    };
    conv("stem", cfg.in_channels, cfg.width);
    for (std::size_t b = 0; b < cfg.blocks; ++b)
        for (std::size_t j = 0; j < cfg.convs_per_block; ++j)
            conv("block" + std::to_string(b) + ".conv" + std::to_string(j), cfg.width, cfg.width);
    LayerCost head{"head", 0, 0, cfg.classes};
    for (std::size_t o = 0; o < cfg.classes; ++o) head.macs += cfg.flat_features();
    head.params = cfg.classes * cfg.flat_features() + cfg.classes;
    r.layers.push_back(head);

    for (const auto& l : r.layers) {
        r.total += l.macs;
        r.param_count += l.params;
        const std::uint64_t weights = l.params - l.out_channels;
        r.flash_bytes_int8 += weights + l.out_channels * 12;
    }
    const std::uint64_t input = cfg.in_channels * cfg.seq_len;
    r.peak_activation_bytes = input + 3 * cfg.flat_features();
    return r;
}

/// L*K*C_in*C + blocks*convs*L*K*C^2 + L*C*classes; 1080C^2 + 1320C for the
/// default geometry.
inline std::uint64_t closed_form_macs(const ModelConfig& c) {
    return c.seq_len * c.kernel * c.in_channels * c.width +
           c.blocks * c.convs_per_block * c.seq_len * c.kernel * c.width * c.width +
           c.seq_len * c.width * c.classes;
}

inline void print_mac_table(std::ostream& os, const MacReport& r) {
    os << std::left << std::setw(16) << "layer" << std::right << std::setw(12) << "MACs" << std::setw(10) << "params"
       << "\n";
    for (const auto& l : r.layers)
        os << std::left << std::setw(16) << l.name << std::right << std::setw(12) << l.macs << std::setw(10)
           << l.params << "\n";
    os << std::left << std::setw(16) << "total" << std::right << std::setw(12) << r.total << std::setw(10)
       << r.param_count << "\n";
    os << std::fixed << std::setprecision(2) << "flash (int8): " << r.flash_kb() << " kB\n"
       << "peak activations (int8): " << static_cast<double>(r.peak_activation_bytes) / 1000.0 << " kB\n";
    os.unsetf(std::ios::fixed);
}

inline void print_mac_kv(std::ostream& os, const MacReport& r) {
    for (const auto& l : r.layers) os << "macs." << l.name << "=" << l.macs << "\n";
    os << "macs.total=" << r.total << "\n"
       << "param_count=" << r.param_count << "\n"
       << "flash_bytes_int8=" << r.flash_bytes_int8 << "\n"
       << "peak_activation_bytes=" << r.peak_activation_bytes << "\n";
}

// ---- EFM1 model file -----------------------------------------------------
// "EFM1", u8 version, config block, u8 folded, then every tensor in
// declaration order as (u32 rank, u32 dims..., f32 data...).

inline constexpr std::uint8_t kModelFileVersion = 1;

namespace detail {

inline void write_config(io::Writer& w, const ModelConfig& c) {
    for (std::size_t v : {c.in_channels, c.seq_len, c.classes, c.width, c.kernel, c.blocks, c.convs_per_block})
        w.u32(static_cast<std::uint32_t>(v));
    w.f32(c.bn_eps);
}

inline ModelConfig read_config(io::Reader& r) {
    ModelConfig c;
    c.in_channels = r.u32();
    c.seq_len = r.u32();
    c.classes = r.u32();
    c.width = r.u32();
    c.kernel = r.u32();
    c.blocks = r.u32();
    c.convs_per_block = r.u32();
    c.bn_eps = r.f32();
    if (c.width > 4096 || c.seq_len > 4096 || c.blocks > 64 || c.convs_per_block > 64 || c.kernel > 63)
        fail(ErrorKind::CorruptFile, "implausible model geometry");
    try {
        c.validate();
    } catch (const Error& e) {
        fail(ErrorKind::CorruptFile, std::string("bad config block: ") + e.what());
    }
    return c;
}

}  // namespace detail

inline void write_model(std::ostream& out, const ModelParams& m) {
    io::Writer w(out);
    w.magic("EFM1");
    w.u8(kModelFileVersion);
    detail::write_config(w, m.config);
    w.u8(m.folded ? 1 : 0);
    m.for_each_tensor([&](const Tensor& t) {
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (float v : t.data()) w.f32(v);
    });
}

inline ModelParams read_model(std::istream& in) {
    io::Reader r(in);
    r.expect_magic("EFM1");
    if (const auto v = r.u8(); v != kModelFileVersion)
        fail(ErrorKind::VersionMismatch, "model file version " + std::to_string(v));
    const ModelConfig cfg = detail::read_config(r);
    ModelParams m = build(cfg, 0);
    m.folded = r.u8() != 0;
    m.for_each_tensor([&](Tensor& t) {
        const std::uint32_t rank = r.u32();
        if (rank != t.rank()) fail(ErrorKind::CorruptFile, "tensor rank mismatch");
        for (std::size_t i = 0; i < rank; ++i)
            if (r.u32() != t.dim(i)) fail(ErrorKind::CorruptFile, "tensor shape mismatch");
        for (float& v : t.data()) v = r.f32();
        if (!t.all_finite()) fail(ErrorKind::CorruptFile, "non-finite parameter");
    });
    if (!r.at_end()) fail(ErrorKind::CorruptFile, "trailing bytes after model");
    return m;
}

inline void save(const ModelParams& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::CorruptFile, "cannot write '" + path.string() + "'");
    write_model(out, m);
}

inline ModelParams load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::CorruptFile, "cannot open '" + path.string() + "'");
    return read_model(in);
}

}  // namespace edgefit
