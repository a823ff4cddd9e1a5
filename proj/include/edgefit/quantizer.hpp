#pragma once

// Post-training int8 quantization of a BN-folded model and integer-only
// inference.
//
// Scheme: symmetric per-output-channel int8 weights (zero point 0),
// asymmetric per-tensor int8 activations, int32 biases at scale s_in*s_w,
// and per-channel fixed-point requantization s_in*s_w/s_out = M0 * 2^(-31-n)
// with M0 in [2^30, 2^31). All rounding is half away from zero.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "edgefit/binary_io.hpp"
#include "edgefit/dataset.hpp"
#include "edgefit/error.hpp"
#include "edgefit/model.hpp"
#include "edgefit/tensor.hpp"

namespace edgefit {

inline constexpr float kActivationRangeFloor = 1e-3f;
inline constexpr std::size_t kCalibrationWindows = 512;

struct QuantSpec {
    float scale = 1.0f;
    std::int32_t zero_point = 0;
    friend bool operator==(const QuantSpec&, const QuantSpec&) = default;
};

/// int8 values with one spec per tensor, or one per slice along dim 0.
struct QuantTensor {
    Shape shape;
    std::vector<std::int8_t> values;
    std::vector<QuantSpec> specs;

    const QuantSpec& spec_for(std::size_t flat_index) const {
        if (specs.size() == 1) return specs[0];
        return specs[flat_index / (values.size() / specs.size())];
    }
    friend bool operator==(const QuantTensor&, const QuantTensor&) = default;
};

enum class QuantMode { Symmetric, Affine };

namespace detail {

// Every float operation of the quantizer's value conversions bumps this;
// qforward reports how many happened between input quantization and logit
// dequantization (must be zero).
inline std::size_t& float_op_counter() {
    thread_local std::size_t count = 0;
    return count;
}

inline std::int32_t round_away(double v) { return static_cast<std::int32_t>(std::round(v)); }

inline std::int8_t saturate_i8(std::int64_t v) {
    return static_cast<std::int8_t>(std::clamp<std::int64_t>(v, -128, 127));
}

inline std::int8_t quantize_value(float x, const QuantSpec& s) {
    ++float_op_counter();
    return saturate_i8(static_cast<std::int64_t>(std::round(static_cast<double>(x) / s.scale)) + s.zero_point);
}

inline float dequantize_value(std::int32_t q, const QuantSpec& s) {
    ++float_op_counter();
    return static_cast<float>(static_cast<double>(q - s.zero_point) * s.scale);
}

inline QuantSpec symmetric_spec(float max_abs) {
    // Zero slices get scale 1/127 so they quantize to 0 without a degenerate scale.
    return {max_abs > 0.0f ? max_abs / 127.0f : 1.0f / 127.0f, 0};
}

}  // namespace detail

/// Affine spec for the range [lo, hi] after widening it to contain 0 and to
/// span at least kActivationRangeFloor.
inline QuantSpec affine_spec(float lo, float hi) {
    lo = std::min(lo, 0.0f);
    hi = std::max(hi, 0.0f);
    if (hi - lo < kActivationRangeFloor) hi = lo + kActivationRangeFloor;
    const double scale = (static_cast<double>(hi) - lo) / 255.0;
    const std::int32_t zp = std::clamp(detail::round_away(-128.0 - lo / scale), -128, 127);
    return {static_cast<float>(scale), zp};
}

/// Symmetric: one spec per slice along dim 0 for rank >= 2 (per output
/// channel), one for rank 1; scale = max|x|/127. Affine: one spec over the
/// tensor's range.
inline QuantTensor quantize_tensor(const Tensor& x, QuantMode mode, int bits = 8) {
    if (bits != 8) fail(ErrorKind::InvalidConfig, "only 8-bit quantization is supported");
    if (!x.all_finite()) fail(ErrorKind::NonFiniteInput, "cannot quantize a tensor with NaN/Inf");
    QuantTensor q{x.shape(), std::vector<std::int8_t>(x.size()), {}};
    if (mode == QuantMode::Symmetric) {
        if (std::all_of(x.data().begin(), x.data().end(), [](float v) { return v == 0.0f; }))
            fail(ErrorKind::AllZeroTensor, "symmetric quantization of an all-zero tensor");
        const std::size_t slices = x.rank() >= 2 ? x.dim(0) : 1, per = x.size() / slices;
        for (std::size_t s = 0; s < slices; ++s) {
            float mx = 0.0f;
            for (std::size_t i = 0; i < per; ++i) mx = std::max(mx, std::abs(x[s * per + i]));
            q.specs.push_back(detail::symmetric_spec(mx));
        }
    } else {
        const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
        q.specs.push_back(affine_spec(*lo, *hi));
    }
    for (std::size_t i = 0; i < x.size(); ++i) q.values[i] = detail::quantize_value(x[i], q.spec_for(i));
    return q;
}

inline Tensor dequantize(const QuantTensor& q) {
    Tensor t(q.shape);
    for (std::size_t i = 0; i < q.values.size(); ++i) t[i] = detail::dequantize_value(q.values[i], q.spec_for(i));
    return t;
}

// ---- fixed-point requantization ------------------------------------------

struct Multiplier {
    std::int32_t m0 = 1 << 30;
    std::int32_t shift = 0;  // right shift n; negative means a left shift
    friend bool operator==(const Multiplier&, const Multiplier&) = default;
};

/// ratio = m0 * 2^(-31 - shift) with m0 in [2^30, 2^31).
inline Multiplier quantize_multiplier(double ratio) {
    if (!(ratio > 0.0) || !std::isfinite(ratio)) fail(ErrorKind::InvalidConfig, "requantization ratio must be > 0");
    int exp = 0;
    const double mant = std::frexp(ratio, &exp);  // ratio = mant * 2^exp, mant in [0.5, 1)
    auto m0 = static_cast<std::int64_t>(std::round(mant * 2147483648.0));
    if (m0 == (std::int64_t{1} << 31)) {
        m0 /= 2;
        ++exp;
    }
    return {static_cast<std::int32_t>(m0), -exp};
}

inline double multiplier_value(const Multiplier& m) {
    return std::ldexp(static_cast<double>(m.m0), -31 - m.shift);
}

/// round_half_away(value * m0 / 2^(31 + shift)), exact in 128-bit integers.
inline std::int64_t rounding_rescale(std::int64_t value, std::int32_t m0, std::int32_t shift) {
    const __int128 prod = static_cast<__int128>(value) * m0;
    const int total = 31 + shift;
    if (total <= 0) return static_cast<std::int64_t>(prod << (-total));
    if (total >= 126) return 0;
    const __int128 mag = prod < 0 ? -prod : prod;
    const __int128 rounded = (mag + (static_cast<__int128>(1) << (total - 1))) >> total;
    const __int128 r = prod < 0 ? -rounded : rounded;
    const __int128 lim = std::numeric_limits<std::int64_t>::max();
    return static_cast<std::int64_t>(std::clamp<__int128>(r, -lim, lim));
}

/// clamp(round_half_away(acc * m0 / 2^31 / 2^n) + zero_point_out, -128, 127).
inline std::int8_t requantize(std::int32_t acc, std::int32_t m0, std::int32_t n, std::int32_t zero_point_out) {
    return detail::saturate_i8(rounding_rescale(acc, m0, n) + zero_point_out);
}

// ---- calibration ---------------------------------------------------------

struct CalibStats {
    std::vector<float> min, max;  // per activation id (see activation_name)
    std::size_t windows = 0;
    friend bool operator==(const CalibStats&, const CalibStats&) = default;
};

/// Float forward over `calib` recording per-activation min/max; every range
/// is widened to include 0 and to span at least kActivationRangeFloor.
inline CalibStats calibrate(const ModelParams& folded, std::span<const Window> calib) {
    if (!folded.folded) fail(ErrorKind::InvalidConfig, "calibrate expects a BN-folded model");
    if (calib.empty()) fail(ErrorKind::EmptyCalibrationSet, "calibration needs at least one window");
    const std::size_t n = activation_count(folded.config);
    CalibStats st{std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f), calib.size()};
    for (const auto& w : calib)
        forward(folded, w.data, [&](std::size_t id, const Tensor& t) {
            const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
            st.min[id] = std::min(st.min[id], *lo);
            st.max[id] = std::max(st.max[id], *hi);
        });
    for (std::size_t i = 0; i < n; ++i)
        if (st.max[i] - st.min[i] < kActivationRangeFloor) st.max[i] = st.min[i] + kActivationRangeFloor;
    return st;
}

/// Up to `count` windows drawn without replacement, deterministically from seed.
inline std::vector<Window> select_calibration(std::span<const Window> windows, std::size_t count,
                                              std::uint64_t seed) {
    std::vector<std::size_t> idx(windows.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    idx.resize(std::min(count, idx.size()));
    std::sort(idx.begin(), idx.end());
    std::vector<Window> out;
    for (auto i : idx) out.push_back(windows[i]);
    return out;
}

// ---- quantized model -----------------------------------------------------

/// Conv (rank-3 weight) or dense (rank-2 weight) layer in integer form.
struct QuantLayer {
    QuantTensor weight;                  // per-output-channel symmetric
    std::vector<std::int32_t> bias;      // scale input.scale * weight scale
    QuantSpec input, output;
    std::vector<Multiplier> requant;     // per output channel
    bool relu = false;

    std::size_t out_channels() const { return weight.shape[0]; }
    friend bool operator==(const QuantLayer&, const QuantLayer&) = default;
};

/// out = relu(rescale(a) + rescale(b) + zp_out): a is the skip (block
/// input), b the conv path.
struct QuantAdd {
    QuantSpec skip, path, output;
    Multiplier skip_requant, path_requant;
    friend bool operator==(const QuantAdd&, const QuantAdd&) = default;
};

struct QuantModel {
    ModelConfig config;
    QuantSpec input;
    QuantLayer stem;
    std::vector<std::vector<QuantLayer>> blocks;
    std::vector<QuantAdd> adds;  // one per block
    QuantLayer head;             // weight [classes x flat]; output spec = calibrated logits range
    friend bool operator==(const QuantModel&, const QuantModel&) = default;
};

namespace detail {

inline QuantLayer quantize_layer(const Tensor& w, const Tensor& b, const QuantSpec& in, const QuantSpec& out,
                                 bool relu, std::size_t fan_in, const std::string& name) {
    QuantLayer l;
    l.input = in;
    l.output = out;
    l.relu = relu;
    const std::size_t c_out = w.dim(0), per = w.size() / c_out;
    l.weight.shape = w.shape();
    l.weight.values.resize(w.size());
    for (std::size_t o = 0; o < c_out; ++o) {
        float mx = 0.0f;
        for (std::size_t i = 0; i < per; ++i) mx = std::max(mx, std::abs(w[o * per + i]));
        const QuantSpec ws = symmetric_spec(mx);
        l.weight.specs.push_back(ws);
        for (std::size_t i = 0; i < per; ++i) l.weight.values[o * per + i] = quantize_value(w[o * per + i], ws);
        const double acc_scale = static_cast<double>(in.scale) * ws.scale;
        const double bq = std::round(static_cast<double>(b[o]) / acc_scale);
        // worst case |acc| = |bias| + fan_in * 127 * 255
        const double bound = std::abs(bq) + static_cast<double>(fan_in) * 127.0 * 255.0;
        if (bound > static_cast<double>(std::numeric_limits<std::int32_t>::max()))
            fail(ErrorKind::AccumulatorOverflow, name + ": int32 accumulator bound exceeded in channel " +
                                                     std::to_string(o));
        l.bias.push_back(static_cast<std::int32_t>(bq));
        l.requant.push_back(quantize_multiplier(acc_scale / out.scale));
    }
    return l;
}

}  // namespace detail

/// Quantizes a BN-folded model using calibrated activation ranges.
inline QuantModel quantize_model(const ModelParams& folded, const CalibStats& stats) {
    if (!folded.folded) fail(ErrorKind::InvalidConfig, "quantize_model expects a BN-folded model");
    const auto& cfg = folded.config;
    const std::size_t n = activation_count(cfg);
    if (stats.min.size() != n || stats.max.size() != n)
        fail(ErrorKind::MissingCalibration, "calibration covers " + std::to_string(stats.min.size()) +
                                                " activations, model has " + std::to_string(n));
    auto spec = [&](std::size_t id) { return affine_spec(stats.min[id], stats.max[id]); };
    const std::size_t conv_fan_in = cfg.width * cfg.kernel;

    QuantModel q;
    q.config = cfg;
    q.input = spec(0);
    q.stem = detail::quantize_layer(folded.stem.weight, folded.stem.bias, q.input, spec(1), true,
                                    cfg.in_channels * cfg.kernel, "stem");
    std::size_t prev = 1;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        std::vector<QuantLayer> layers;
        std::size_t in_id = prev;
        for (std::size_t j = 0; j < cfg.convs_per_block; ++j) {
            const std::size_t out_id = block_conv_activation(cfg, b, j);
            const auto& l = folded.blocks[b][j];
            layers.push_back(detail::quantize_layer(l.weight, l.bias, spec(in_id), spec(out_id),
                                                    j + 1 < cfg.convs_per_block, conv_fan_in,
                                                    activation_name(cfg, out_id)));
            in_id = out_id;
        }
        QuantAdd add;
        add.skip = spec(prev);
        add.path = spec(in_id);
        add.output = spec(block_output_activation(cfg, b));
        add.skip_requant = quantize_multiplier(static_cast<double>(add.skip.scale) / add.output.scale);
        add.path_requant = quantize_multiplier(static_cast<double>(add.path.scale) / add.output.scale);
        q.blocks.push_back(std::move(layers));
        q.adds.push_back(add);
        prev = block_output_activation(cfg, b);
    }
    q.head = detail::quantize_layer(folded.head_weight, folded.head_bias, spec(prev), spec(logits_activation(cfg)),
                                    false, cfg.flat_features(), "head");
    return q;
}

// ---- integer kernels -----------------------------------------------------

/// int32 accumulators of a same-padded conv: bias + sum w * (x - zp_in).
inline std::vector<std::int32_t> qconv_accumulate(const QuantLayer& l, std::span<const std::int8_t> x,
                                                  std::size_t len) {
    const std::size_t c_out = l.weight.shape[0], c_in = l.weight.shape[1], k = l.weight.shape[2];
    if (x.size() != c_in * len) fail(ErrorKind::ShapeMismatch, "qconv input size mismatch");
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto n = static_cast<std::ptrdiff_t>(len);
    const std::int32_t zp = l.input.zero_point;
    std::vector<std::int32_t> acc(c_out * len);
    for (std::size_t o = 0; o < c_out; ++o) {
        std::int32_t* out = &acc[o * len];
        std::fill(out, out + len, l.bias[o]);
        for (std::size_t ci = 0; ci < c_in; ++ci) {
            const std::int8_t* in = &x[ci * len];
            for (std::size_t kk = 0; kk < k; ++kk) {
                const std::int32_t wv = l.weight.values[(o * c_in + ci) * k + kk];
                const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - pad;
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off), hi = std::min(n, n - off);
                for (std::ptrdiff_t t = lo; t < hi; ++t) out[t] += wv * (static_cast<std::int32_t>(in[t + off]) - zp);
            }
        }
    }
    return acc;
}

/// Requantized int8 output of a conv layer (ReLU = clamp at zp_out).
inline std::vector<std::int8_t> qconv(const QuantLayer& l, std::span<const std::int8_t> x, std::size_t len) {
    const auto acc = qconv_accumulate(l, x, len);
    std::vector<std::int8_t> y(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const auto& r = l.requant[i / len];
        std::int8_t v = requantize(acc[i], r.m0, r.shift, l.output.zero_point);
        if (l.relu) v = std::max<std::int8_t>(v, static_cast<std::int8_t>(l.output.zero_point));
        y[i] = v;
    }
    return y;
}

inline std::vector<std::int32_t> qdense_accumulate(const QuantLayer& l, std::span<const std::int8_t> x) {
    const std::size_t m = l.weight.shape[0], n = l.weight.shape[1];
    if (x.size() != n) fail(ErrorKind::ShapeMismatch, "qdense input size mismatch");
    std::vector<std::int32_t> acc(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::int32_t s = l.bias[i];
        const std::int8_t* row = &l.weight.values[i * n];
        for (std::size_t j = 0; j < n; ++j) s += static_cast<std::int32_t>(row[j]) * (x[j] - l.input.zero_point);
        acc[i] = s;
    }
    return acc;
}

inline std::vector<std::int8_t> qadd(const QuantAdd& a, std::span<const std::int8_t> skip,
                                     std::span<const std::int8_t> path) {
    std::vector<std::int8_t> out(skip.size());
    for (std::size_t i = 0; i < skip.size(); ++i) {
        const std::int64_t s = rounding_rescale(skip[i] - a.skip.zero_point, a.skip_requant.m0, a.skip_requant.shift);
        const std::int64_t p = rounding_rescale(path[i] - a.path.zero_point, a.path_requant.m0, a.path_requant.shift);
        const std::int8_t v = detail::saturate_i8(s + p + a.output.zero_point);
        out[i] = std::max<std::int8_t>(v, static_cast<std::int8_t>(a.output.zero_point));
    }
    return out;
}

struct QForwardTrace {
    std::size_t float_ops_in_integer_path = 0;
    std::vector<std::int32_t> head_accumulators;
    std::vector<std::int8_t> int8_logits;  // head accumulators requantized to the logits spec
};

/// Integer inference: quantize the input, run every layer in int8/int32,
/// and dequantize the head's int32 accumulators into float logits.
inline Tensor qforward(const QuantModel& q, const Tensor& x, QForwardTrace* trace = nullptr) {
    const auto& cfg = q.config;
    if (x.rank() != 2 || x.dim(0) != cfg.in_channels || x.dim(1) != cfg.seq_len)
        fail(ErrorKind::ShapeMismatch, "qforward expects input [7x" + std::to_string(cfg.seq_len) + "]");
    std::vector<std::int8_t> h(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) h[i] = detail::quantize_value(x[i], q.input);

    const std::size_t before = detail::float_op_counter();
    const std::size_t len = cfg.seq_len;
    h = qconv(q.stem, h, len);
    for (std::size_t b = 0; b < q.blocks.size(); ++b) {
        std::vector<std::int8_t> y = h;
        for (const auto& l : q.blocks[b]) y = qconv(l, y, len);
        h = qadd(q.adds[b], h, y);
    }
    const auto acc = qdense_accumulate(q.head, h);
    const std::size_t integer_float_ops = detail::float_op_counter() - before;

    Tensor logits({cfg.classes});
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        ++detail::float_op_counter();
        logits[c] = static_cast<float>(static_cast<double>(acc[c]) * q.head.input.scale *
                                       q.head.weight.specs[c].scale);
    }
    if (trace) {
        trace->float_ops_in_integer_path = integer_float_ops;
        trace->head_accumulators = acc;
        trace->int8_logits.resize(acc.size());
        for (std::size_t c = 0; c < acc.size(); ++c)
            trace->int8_logits[c] =
                requantize(acc[c], q.head.requant[c].m0, q.head.requant[c].shift, q.head.output.zero_point);
    }
    return logits;
}

// ---- EFQ1 file -----------------------------------------------------------
// "EFQ1", u8 version, config block, input spec, then per layer (stem, block
// convs, head): u32 rank, u32 dims, i8 weights, per channel (f32 weight
// scale, i32 bias, i32 M0, i32 n), input spec, output spec, u8 relu; then per
// block add: skip/path/output specs and two (M0, n) pairs.
// A spec is (f32 scale, i32 zero_point).

inline constexpr std::uint8_t kQuantFileVersion = 1;

namespace detail {

inline void write_spec(io::Writer& w, const QuantSpec& s) {
    w.f32(s.scale);
    w.i32(s.zero_point);
}
inline QuantSpec read_spec(io::Reader& r) {
    QuantSpec s;
    s.scale = r.f32();
    s.zero_point = r.i32();
    if (!(s.scale > 0.0f) || !std::isfinite(s.scale) || s.zero_point < -128 || s.zero_point > 127)
        fail(ErrorKind::CorruptFile, "invalid quantization spec");
    return s;
}

inline void write_layer(io::Writer& w, const QuantLayer& l) {
    w.u32(static_cast<std::uint32_t>(l.weight.shape.size()));
    for (auto d : l.weight.shape) w.u32(static_cast<std::uint32_t>(d));
    for (auto v : l.weight.values) w.i8(v);
    for (std::size_t o = 0; o < l.out_channels(); ++o) {
        w.f32(l.weight.specs[o].scale);
        w.i32(l.bias[o]);
        w.i32(l.requant[o].m0);
        w.i32(l.requant[o].shift);
    }
    write_spec(w, l.input);
    write_spec(w, l.output);
    w.u8(l.relu ? 1 : 0);
}

inline QuantLayer read_layer(io::Reader& r, const Shape& expected) {
    QuantLayer l;
    const std::uint32_t rank = r.u32();
    if (rank != expected.size()) fail(ErrorKind::CorruptFile, "layer rank mismatch");
    for (std::size_t i = 0; i < rank; ++i) {
        l.weight.shape.push_back(r.u32());
        if (l.weight.shape.back() != expected[i]) fail(ErrorKind::CorruptFile, "layer shape mismatch");
    }
    l.weight.values.resize(Tensor::element_count(l.weight.shape));
    for (auto& v : l.weight.values) v = r.i8();
    for (std::size_t o = 0; o < expected[0]; ++o) {
        const float s = r.f32();
        if (!(s > 0.0f) || !std::isfinite(s)) fail(ErrorKind::CorruptFile, "invalid weight scale");
        l.weight.specs.push_back({s, 0});
        l.bias.push_back(r.i32());
        Multiplier m;
        m.m0 = r.i32();
        m.shift = r.i32();
        l.requant.push_back(m);
    }
    l.input = read_spec(r);
    l.output = read_spec(r);
    l.relu = r.u8() != 0;
    return l;
}

}  // namespace detail

inline void write_quant_model(std::ostream& out, const QuantModel& q) {
    io::Writer w(out);
    w.magic("EFQ1");
    w.u8(kQuantFileVersion);
    detail::write_config(w, q.config);
    detail::write_spec(w, q.input);
    detail::write_layer(w, q.stem);
    for (const auto& block : q.blocks)
        for (const auto& l : block) detail::write_layer(w, l);
    detail::write_layer(w, q.head);
    for (const auto& a : q.adds) {
        detail::write_spec(w, a.skip);
        detail::write_spec(w, a.path);
        detail::write_spec(w, a.output);
        w.i32(a.skip_requant.m0);
        w.i32(a.skip_requant.shift);
        w.i32(a.path_requant.m0);
        w.i32(a.path_requant.shift);
    }
}

inline QuantModel read_quant_model(std::istream& in) {
    io::Reader r(in);
    r.expect_magic("EFQ1");
    if (const auto v = r.u8(); v != kQuantFileVersion)
        fail(ErrorKind::VersionMismatch, "quantized model version " + std::to_string(v));
    QuantModel q;
    q.config = detail::read_config(r);
    const auto& c = q.config;
    q.input = detail::read_spec(r);
    q.stem = detail::read_layer(r, {c.width, c.in_channels, c.kernel});
    for (std::size_t b = 0; b < c.blocks; ++b) {
        q.blocks.emplace_back();
        for (std::size_t j = 0; j < c.convs_per_block; ++j)
            q.blocks.back().push_back(detail::read_layer(r, {c.width, c.width, c.kernel}));
    }
    q.head = detail::read_layer(r, {c.classes, c.flat_features()});
    for (std::size_t b = 0; b < c.blocks; ++b) {
        QuantAdd a;
        a.skip = detail::read_spec(r);
        a.path = detail::read_spec(r);
        a.output = detail::read_spec(r);
        a.skip_requant.m0 = r.i32();
        a.skip_requant.shift = r.i32();
        a.path_requant.m0 = r.i32();
        a.path_requant.shift = r.i32();
        q.adds.push_back(a);
    }
    if (!r.at_end()) fail(ErrorKind::CorruptFile, "trailing bytes after quantized model");
    return q;
}

inline void save_quant(const QuantModel& q, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::CorruptFile, "cannot write '" + path.string() + "'");
    write_quant_model(out, q);
}

inline QuantModel load_quant(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::CorruptFile, "cannot open '" + path.string() + "'");
    return read_quant_model(in);
}

/// Folds BN, calibrates on up to 512 seeded windows and quantizes.
inline QuantModel quantize_pipeline(const ModelParams& model, std::span<const Window> calib_pool,
                                    std::uint64_t seed) {
    const ModelParams folded = fold_batchnorm(model);
    const auto calib = select_calibration(calib_pool, kCalibrationWindows, seed);
    return quantize_model(folded, calibrate(folded, calib));
}

}  // namespace edgefit
