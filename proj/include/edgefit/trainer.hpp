#pragma once

// Training for the residual model: batch forward with training-mode batch
// norm, hand-derived backward pass, Adam, early stopping on validation loss,
// and balanced-accuracy evaluation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "edgefit/dataset.hpp"
#include "edgefit/error.hpp"
#include "edgefit/model.hpp"
#include "edgefit/parallel.hpp"
#include "edgefit/tensor.hpp"

namespace edgefit {

struct Hyperparams {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t epochs = 1000;
    std::size_t patience = 100;
    std::size_t batch_size = 64;
    float bn_momentum = 0.9f;
    int validation_session = 5;

    void validate() const {
        if (!(lr > 0.0)) fail(ErrorKind::InvalidConfig, "lr must be > 0");
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
            fail(ErrorKind::InvalidConfig, "beta1 and beta2 must lie in (0, 1)");
        if (patience > epochs) fail(ErrorKind::InvalidConfig, "patience must not exceed epochs");
        if (batch_size == 0) fail(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    }
};

struct AdamState {
    std::uint64_t step = 0;
    ModelParams m;  // first moments, mirrors the parameters
    ModelParams v;  // second moments

    static AdamState zeros_like(const ModelParams& p) {
        AdamState s{0, p, p};
        s.m.for_each_tensor([](Tensor& t) { std::fill(t.data().begin(), t.data().end(), 0.0f); });
        s.v.for_each_tensor([](Tensor& t) { std::fill(t.data().begin(), t.data().end(), 0.0f); });
        return s;
    }
};

struct Metrics {
    std::array<std::array<std::size_t, kClasses>, kClasses> confusion{};  // [truth][predicted]
    double balanced_accuracy = 0.0;
    double loss = 0.0;
    std::size_t count = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_balanced_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

/// -weight * ln(max(p[target], 1e-12)).
inline double weighted_cross_entropy(const Tensor& probs, int target, double weight) {
    const double p = std::max<double>(probs[static_cast<std::size_t>(target)], 1e-12);
    return -weight * std::log(p);
}

namespace detail {

// x: [B x C_in x L] -> y: [B x C_out x L]
inline Tensor conv_batch(const Tensor& x, const ConvLayer& l) {
    const std::size_t batch = x.dim(0), c_in = x.dim(1), len = x.dim(2);
    const std::size_t c_out = l.weight.dim(0);
    Tensor y({batch, c_out, len});
    parallel_for(batch, [&](std::size_t n) {
        const Tensor xs({c_in, len}, std::vector<float>(x.data().begin() + n * c_in * len,
                                                        x.data().begin() + (n + 1) * c_in * len));
        const Tensor ys = conv1d_same(xs, l.weight, l.bias);
        std::copy(ys.data().begin(), ys.data().end(), y.data().begin() + n * c_out * len);
    });
    return y;
}

// Given dy, accumulates dw/db and returns dx (when wanted).
inline Tensor conv_batch_backward(const Tensor& x, const ConvLayer& l, const Tensor& dy, ConvLayer& grad,
                                  bool want_dx, bool bias_cancels) {
    const std::size_t batch = x.dim(0), c_in = x.dim(1), len = x.dim(2);
    const std::size_t c_out = l.weight.dim(0), k = l.weight.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto n_len = static_cast<std::ptrdiff_t>(len);

    parallel_for(c_out, [&](std::size_t co) {
        double db = 0.0;
        for (std::size_t n = 0; n < batch; ++n) {
            const float* g = &dy.at(n, co, 0);
            for (std::size_t t = 0; t < len; ++t) db += g[t];
        }
        // A bias feeding batch-statistics BN cancels in the mean subtraction.
        if (!bias_cancels) grad.bias[co] += static_cast<float>(db);
        for (std::size_t ci = 0; ci < c_in; ++ci)
            for (std::size_t kk = 0; kk < k; ++kk) {
                const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - pad;
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off), hi = std::min(n_len, n_len - off);
                double acc = 0.0;
                for (std::size_t n = 0; n < batch; ++n) {
                    const float* g = &dy.at(n, co, 0);
                    const float* in = &x.at(n, ci, 0);
                    float part = 0.0f;
                    for (std::ptrdiff_t t = lo; t < hi; ++t) part += g[t] * in[t + off];
                    acc += part;
                }
                grad.weight.at(co, ci, kk) += static_cast<float>(acc);
            }
    });

    if (!want_dx) return {};
    Tensor dx({batch, c_in, len});
    parallel_for(batch, [&](std::size_t n) {
        for (std::size_t co = 0; co < c_out; ++co) {
            const float* g = &dy.at(n, co, 0);
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                float* out = &dx.at(n, ci, 0);
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const float wv = l.weight.at(co, ci, kk);
                    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - pad;
                    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off), hi = std::min(n_len, n_len - off);
                    for (std::ptrdiff_t t = lo; t < hi; ++t) out[t + off] += wv * g[t];
                }
            }
        }
    });
    return dx;
}

struct BnCache {
    Tensor xhat;
    std::vector<float> inv_std;
    Tensor batch_mean, batch_var;  // biased batch statistics
};

// Training-mode batch norm over (batch, time) per channel.
inline Tensor bn_train(const Tensor& y, const BatchNorm& bn, float eps, BnCache& cache) {
    const std::size_t batch = y.dim(0), c = y.dim(1), len = y.dim(2);
    const double count = static_cast<double>(batch * len);
    cache.xhat = Tensor(y.shape());
    cache.inv_std.assign(c, 0.0f);
    cache.batch_mean = Tensor({c});
    cache.batch_var = Tensor({c});
    Tensor out(y.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t t = 0; t < len; ++t) sum += y.at(n, ch, t);
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t t = 0; t < len; ++t) sq += (y.at(n, ch, t) - mean) * (y.at(n, ch, t) - mean);
        const double var = sq / count;
        const double inv = 1.0 / std::sqrt(var + eps);
        cache.inv_std[ch] = static_cast<float>(inv);
        cache.batch_mean[ch] = static_cast<float>(mean);
        cache.batch_var[ch] = static_cast<float>(var);
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t t = 0; t < len; ++t) {
                const float xh = static_cast<float>((y.at(n, ch, t) - mean) * inv);
                cache.xhat.at(n, ch, t) = xh;
                out.at(n, ch, t) = bn.gamma[ch] * xh + bn.beta[ch];
            }
    }
    return out;
}

inline Tensor bn_train_backward(const Tensor& dout, const BatchNorm& bn, const BnCache& cache, BatchNorm& grad) {
    const std::size_t batch = dout.dim(0), c = dout.dim(1), len = dout.dim(2);
    const double count = static_cast<double>(batch * len);
    Tensor dy(dout.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t t = 0; t < len; ++t) {
                sum_d += dout.at(n, ch, t);
                sum_dx += static_cast<double>(dout.at(n, ch, t)) * cache.xhat.at(n, ch, t);
            }
        grad.beta[ch] += static_cast<float>(sum_d);
        grad.gamma[ch] += static_cast<float>(sum_dx);
        const double g = bn.gamma[ch];
        const double scale = g * cache.inv_std[ch] / count;
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t t = 0; t < len; ++t)
                dy.at(n, ch, t) = static_cast<float>(
                    scale * (count * dout.at(n, ch, t) - sum_d - cache.xhat.at(n, ch, t) * sum_dx));
    }
    return dy;
}

inline void relu_inplace(Tensor& t) {
    for (float& v : t.data()) v = v > 0.0f ? v : 0.0f;
}

// dy *= (activation > 0)
inline void relu_mask(Tensor& dy, const Tensor& activation) {
    for (std::size_t i = 0; i < dy.size(); ++i)
        if (!(activation[i] > 0.0f)) dy[i] = 0.0f;
}

struct ConvCache {
    Tensor input;
    Tensor out;  // after BN (and ReLU, when the layer has one)
    BnCache bn;
};

struct TrainForward {
    ConvCache stem;
    std::vector<std::vector<ConvCache>> blocks;
    std::vector<Tensor> block_sum;  // conv path + skip, before ReLU
    Tensor features;                // [B x C x L] fed to the head
    Tensor probs;                   // [B x classes]
};

inline Tensor stack_inputs(std::span<const Window* const> batch, const ModelConfig& cfg) {
    Tensor x({batch.size(), cfg.in_channels, cfg.seq_len});
    const std::size_t per = cfg.in_channels * cfg.seq_len;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const Tensor& d = batch[n]->data;
        if (d.size() != per || d.dim(0) != cfg.in_channels)
            fail(ErrorKind::ShapeMismatch, "window shape " + shape_string(d.shape()) + " does not match model input");
        std::copy(d.data().begin(), d.data().end(), x.data().begin() + n * per);
    }
    return x;
}

inline Tensor conv_bn_train(const ModelParams& m, const ConvLayer& l, Tensor input, bool with_relu, ConvCache& c) {
    c.input = std::move(input);
    c.out = bn_train(conv_batch(c.input, l), l.bn, m.config.bn_eps, c.bn);
    if (with_relu) relu_inplace(c.out);
    return c.out;
}

inline TrainForward train_forward(const ModelParams& m, std::span<const Window* const> batch) {
    const auto& cfg = m.config;
    TrainForward f;
    Tensor h = conv_bn_train(m, m.stem, stack_inputs(batch, cfg), true, f.stem);
    f.blocks.resize(m.blocks.size());
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        const auto& block = m.blocks[b];
        f.blocks[b].resize(block.size());
        Tensor y = h;
        for (std::size_t j = 0; j < block.size(); ++j)
            y = conv_bn_train(m, block[j], std::move(y), j + 1 < block.size(), f.blocks[b][j]);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += h[i];
        f.block_sum.push_back(y);
        relu_inplace(y);
        h = std::move(y);
    }
    f.features = h;
    const std::size_t batch_n = batch.size(), flat = cfg.flat_features();
    f.probs = Tensor({batch_n, cfg.classes});
    for (std::size_t n = 0; n < batch_n; ++n) {
        const Tensor x({flat}, std::vector<float>(h.data().begin() + n * flat, h.data().begin() + (n + 1) * flat));
        const Tensor p = softmax(dense(x, m.head_weight, m.head_bias));
        std::copy(p.data().begin(), p.data().end(), f.probs.data().begin() + n * cfg.classes);
    }
    return f;
}

inline Tensor conv_bn_backward(const ConvLayer& l, const ConvCache& c, Tensor dout, bool with_relu, ConvLayer& g,
                               bool want_dx) {
    if (with_relu) relu_mask(dout, c.out);
    const Tensor dy = bn_train_backward(dout, l.bn, c.bn, g.bn);
    return conv_batch_backward(c.input, l, dy, g, want_dx, true);
}

}  // namespace detail

struct BackwardResult {
    ModelParams grads;  // mirrors params; BN mean/var entries stay zero
    double loss = 0.0;  // mean over the batch of weight * CE
    // Batch statistics per BN layer (stem first, then block convs in order),
    // for the running-statistics update.
    std::vector<std::pair<Tensor, Tensor>> batch_stats;
};

inline ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    z.for_each_tensor([](Tensor& t) { std::fill(t.data().begin(), t.data().end(), 0.0f); });
    return z;
}

/// Gradient of mean_n weight_n * CE_n with batch norm in training mode.
inline BackwardResult backward(const ModelParams& m, std::span<const Window* const> batch) {
    if (batch.empty()) fail(ErrorKind::EmptyTrainSet, "backward needs a nonempty batch");
    if (m.folded) fail(ErrorKind::InvalidConfig, "cannot train a BN-folded model");
    const auto& cfg = m.config;
    const detail::TrainForward f = detail::train_forward(m, batch);
    BackwardResult r;
    r.grads = zeros_like(m);
    const std::size_t batch_n = batch.size(), flat = cfg.flat_features(), classes = cfg.classes;
    const double inv_b = 1.0 / static_cast<double>(batch_n);

    Tensor dlogits({batch_n, classes});
    for (std::size_t n = 0; n < batch_n; ++n) {
        const auto target = static_cast<std::size_t>(batch[n]->label);
        const double w = batch[n]->weight;
        const double p = std::max<double>(f.probs.at(n, target), 1e-12);
        r.loss += -w * std::log(p) * inv_b;
        for (std::size_t c = 0; c < classes; ++c)
            dlogits.at(n, c) =
                static_cast<float>(w * inv_b * (f.probs.at(n, c) - (c == target ? 1.0 : 0.0)));
    }

    // head
    for (std::size_t c = 0; c < classes; ++c) {
        double db = 0.0;
        for (std::size_t n = 0; n < batch_n; ++n) db += dlogits.at(n, c);
        r.grads.head_bias[c] = static_cast<float>(db);
    }
    parallel_for(classes, [&](std::size_t c) {
        float* row = &r.grads.head_weight.at(c, 0);
        for (std::size_t n = 0; n < batch_n; ++n) {
            const float g = dlogits.at(n, c);
            const float* feat = f.features.data().data() + n * flat;
            for (std::size_t i = 0; i < flat; ++i) row[i] += g * feat[i];
        }
    });
    Tensor dh(f.features.shape());
    parallel_for(batch_n, [&](std::size_t n) {
        float* out = dh.data().data() + n * flat;
        for (std::size_t c = 0; c < classes; ++c) {
            const float g = dlogits.at(n, c);
            const float* row = &m.head_weight.at(c, 0);
            for (std::size_t i = 0; i < flat; ++i) out[i] += g * row[i];
        }
    });

    for (std::size_t b = m.blocks.size(); b-- > 0;) {
        const auto& block = m.blocks[b];
        detail::relu_mask(dh, f.block_sum[b]);
        Tensor dy = dh;  // gradient into the conv path; dh keeps the skip share
        for (std::size_t j = block.size(); j-- > 0;)
            dy = detail::conv_bn_backward(block[j], f.blocks[b][j], std::move(dy), j + 1 < block.size(),
                                          r.grads.blocks[b][j], true);
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dy[i];
    }
    detail::conv_bn_backward(m.stem, f.stem, std::move(dh), true, r.grads.stem, false);

    r.batch_stats.emplace_back(f.stem.bn.batch_mean, f.stem.bn.batch_var);
    for (const auto& block : f.blocks)
        for (const auto& c : block) r.batch_stats.emplace_back(c.bn.batch_mean, c.bn.batch_var);
    return r;
}

inline BackwardResult backward(const ModelParams& m, std::span<const Window> batch) {
    std::vector<const Window*> ptrs;
    for (const auto& w : batch) ptrs.push_back(&w);
    return backward(m, std::span<const Window* const>(ptrs));
}

/// Mean weighted CE of a batch with training-mode (batch-statistics) BN.
inline double batch_loss(const ModelParams& m, std::span<const Window* const> batch) {
    const auto f = detail::train_forward(m, batch);
    double loss = 0.0;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const double p = std::max<double>(f.probs.at(n, static_cast<std::size_t>(batch[n]->label)), 1e-12);
        loss += -static_cast<double>(batch[n]->weight) * std::log(p);
    }
    return loss / static_cast<double>(batch.size());
}

namespace detail {

// Calls f(param, grad, m, v) for every trainable tensor (BN running
// statistics excluded).
template <typename F>
void for_each_trainable(ModelParams& p, const ModelParams& g, ModelParams& m, ModelParams& v, F&& f) {
    auto layer = [&](ConvLayer& lp, const ConvLayer& lg, ConvLayer& lm, ConvLayer& lv) {
        f(lp.weight, lg.weight, lm.weight, lv.weight);
        f(lp.bias, lg.bias, lm.bias, lv.bias);
        f(lp.bn.gamma, lg.bn.gamma, lm.bn.gamma, lv.bn.gamma);
        f(lp.bn.beta, lg.bn.beta, lm.bn.beta, lv.bn.beta);
    };
    layer(p.stem, g.stem, m.stem, v.stem);
    for (std::size_t b = 0; b < p.blocks.size(); ++b)
        for (std::size_t j = 0; j < p.blocks[b].size(); ++j)
            layer(p.blocks[b][j], g.blocks[b][j], m.blocks[b][j], v.blocks[b][j]);
    f(p.head_weight, g.head_weight, m.head_weight, v.head_weight);
    f(p.head_bias, g.head_bias, m.head_bias, v.head_bias);
}

}  // namespace detail

/// Bias-corrected Adam; increments state.step.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const Hyperparams& hp) {
    bool shapes_ok = params.config == grads.config && params.config == state.m.config &&
                     params.config == state.v.config;
    if (!shapes_ok) fail(ErrorKind::ShapeMismatch, "adam_step: parameter, gradient and state shapes differ");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(hp.beta1, t), c2 = 1.0 - std::pow(hp.beta2, t);
    detail::for_each_trainable(params, grads, state.m, state.v,
                               [&](Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
                                   if (p.shape() != g.shape() || p.shape() != m.shape() || p.shape() != v.shape())
                                       fail(ErrorKind::ShapeMismatch, "adam_step: tensor shapes differ");
                                   for (std::size_t i = 0; i < p.size(); ++i) {
                                       const double gi = g[i];
                                       const double mi = hp.beta1 * m[i] + (1.0 - hp.beta1) * gi;
                                       const double vi = hp.beta2 * v[i] + (1.0 - hp.beta2) * gi * gi;
                                       m[i] = static_cast<float>(mi);
                                       v[i] = static_cast<float>(vi);
                                       const double mhat = mi / c1, vhat = vi / c2;
                                       p[i] -= static_cast<float>(hp.lr * mhat / (std::sqrt(vhat) + hp.adam_eps));
                                   }
                               });
}

/// running = momentum * running + (1 - momentum) * batch, per BN layer.
inline void update_running_stats(ModelParams& m, const std::vector<std::pair<Tensor, Tensor>>& stats,
                                 float momentum) {
    std::size_t idx = 0;
    auto upd = [&](ConvLayer& l) {
        const auto& [mean, var] = stats.at(idx++);
        for (std::size_t c = 0; c < mean.size(); ++c) {
            l.bn.mean[c] = momentum * l.bn.mean[c] + (1.0f - momentum) * mean[c];
            l.bn.var[c] = momentum * l.bn.var[c] + (1.0f - momentum) * var[c];
        }
    };
    upd(m.stem);
    for (auto& block : m.blocks)
        for (auto& l : block) upd(l);
}

inline double balanced_accuracy(const std::array<std::array<std::size_t, kClasses>, kClasses>& confusion) {
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < kClasses; ++c) {
        const std::size_t row = std::accumulate(confusion[c].begin(), confusion[c].end(), std::size_t{0});
        if (row == 0) continue;
        ++present;
        sum += static_cast<double>(confusion[c][c]) / static_cast<double>(row);
    }
    return present == 0 ? 0.0 : sum / static_cast<double>(present);
}

/// Argmax predictions with any logit function `predict(window) -> Tensor`.
template <typename Predict>
Metrics evaluate_with(std::span<const Window> windows, Predict&& predict) {
    if (windows.empty()) fail(ErrorKind::EmptyTestSet, "evaluate needs at least one window");
    Metrics out;
    for (const auto& w : windows) {
        const Tensor logits = predict(w);
        const Tensor p = softmax(logits);
        const std::size_t pred = argmax(logits);
        ++out.confusion.at(static_cast<std::size_t>(w.label)).at(pred);
        out.loss += weighted_cross_entropy(p, w.label, w.weight);
    }
    out.count = windows.size();
    out.loss /= static_cast<double>(windows.size());
    out.balanced_accuracy = balanced_accuracy(out.confusion);
    return out;
}

inline Metrics evaluate(const ModelParams& m, std::span<const Window> windows) {
    return evaluate_with(windows, [&](const Window& w) { return forward(m, w.data); });
}

namespace detail {

inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
}

}  // namespace detail

/// Training windows minus the validation session; when that session is
/// absent, every tenth window (by position) is used for validation instead.
inline std::pair<std::vector<Window>, std::vector<Window>> validation_split(std::span<const Window> train,
                                                                            int session) {
    std::pair<std::vector<Window>, std::vector<Window>> out;
    for (const auto& w : train) (w.session == session ? out.second : out.first).push_back(w);
    if (out.second.empty() || out.first.empty()) {
        out.first.clear();
        out.second.clear();
        for (std::size_t i = 0; i < train.size(); ++i) (i % 10 == 9 ? out.second : out.first).push_back(train[i]);
    }
    return out;
}

struct TrainResult {
    ModelParams model;
    TrainHistory history;
};

/// Trains on fit windows, monitoring `val` loss after every epoch; stops once
/// `patience` consecutive epochs (at least one) fail to improve, and returns
/// the best-epoch weights.
inline TrainResult train(std::span<const Window> fit, std::span<const Window> val, const ModelConfig& config,
                         const Hyperparams& hp, std::uint64_t seed) {
    hp.validate();
    if (fit.empty()) fail(ErrorKind::EmptyTrainSet, "no training windows");
    TrainResult r;
    ModelParams params = build(config, seed);
    AdamState adam = AdamState::zeros_like(params);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(fit.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best = std::numeric_limits<double>::infinity();
    ModelParams best_params = params;
    std::size_t since_best = 0;
    const std::size_t stop_after = std::max<std::size_t>(hp.patience, 1);
    for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
        detail::shuffle_indices(order, rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
            const std::size_t end = std::min(order.size(), start + hp.batch_size);
            std::vector<const Window*> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(&fit[order[i]]);
            const BackwardResult g = backward(params, batch);
            epoch_loss += g.loss * static_cast<double>(batch.size());
            adam_step(params, g.grads, adam, hp);
            update_running_stats(params, g.batch_stats, hp.bn_momentum);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(fit.size());
        const Metrics vm = evaluate(params, val.empty() ? fit : val);
        rec.val_loss = vm.loss;
        rec.val_balanced_accuracy = vm.balanced_accuracy;
        r.history.epochs.push_back(rec);
        if (rec.val_loss < best) {
            best = rec.val_loss;
            best_params = params;
            r.history.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= stop_after) {
            r.history.stopped_early = epoch < hp.epochs;
            break;
        }
    }
    r.model = std::move(best_params);
    return r;
}

/// Leave-one-user-out training for one fold: validation is carved from the
/// training subjects (see validation_split); the held-out subject is never seen.
inline TrainResult train_fold(const DatasetSplit& split, const ModelConfig& config, const Hyperparams& hp,
                              std::uint64_t seed) {
    if (split.train.empty()) fail(ErrorKind::EmptyTrainSet, "fold has no training windows");
    auto [fit, val] = validation_split(split.train, hp.validation_session);
    return train(fit, val, config, hp, seed);
}

inline void write_history_csv(std::ostream& os, const TrainHistory& h) {
    os << "epoch,train_loss,val_loss,val_bacc\n";
    os.precision(9);
    for (const auto& e : h.epochs)
        os << e.epoch << "," << e.train_loss << "," << e.val_loss << "," << e.val_balanced_accuracy << "\n";
}

inline void write_metrics(std::ostream& os, const Metrics& m) {
    os.precision(6);
    os << "windows=" << m.count << "\n"
       << "balanced_accuracy=" << m.balanced_accuracy << "\n"
       << "loss=" << m.loss << "\n"
       << "confusion (rows = truth, cols = predicted)\n";
    for (const auto& row : m.confusion) {
        for (std::size_t c = 0; c < kClasses; ++c) os << (c ? " " : "") << row[c];
        os << "\n";
    }
}

}  // namespace edgefit
