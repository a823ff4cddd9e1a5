#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "edgefit/error.hpp"

namespace edgefit {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense row-major float32 array of rank 1..3.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        validate_rank();
        data_.assign(element_count(shape_), 0.0f);
    }

    Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_rank();
        if (data_.size() != element_count(shape_))
            fail(ErrorKind::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                               " does not match shape " + shape_string(shape_));
    }

    static Tensor filled(Shape shape, float value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    const float& operator[](std::size_t i) const { return data_[i]; }

    // (row, col) access for rank-2 tensors.
    float& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    const float& at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    float& at(std::size_t a, std::size_t b, std::size_t c) {
        return data_[(a * shape_[1] + b) * shape_[2] + c];
    }
    const float& at(std::size_t a, std::size_t b, std::size_t c) const {
        return data_[(a * shape_[1] + b) * shape_[2] + c];
    }

    Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

    static std::size_t element_count(const Shape& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

private:
    void validate_rank() const {
        if (shape_.empty() || shape_.size() > 3)
            fail(ErrorKind::ShapeMismatch, "tensor rank must be 1..3, got " + shape_string(shape_));
    }

    Shape shape_;
    std::vector<float> data_;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::ShapeMismatch, what);
}

inline Tensor checked(Tensor t, const char* kernel) {
    if (!t.all_finite()) fail(ErrorKind::NonFiniteInput, std::string(kernel) + " produced a non-finite value");
    return t;
}

}  // namespace detail

/// Stride-1 cross-correlation with (K-1)/2 zeros on each side, so the output
/// keeps the input length. x: [C_in x L], w: [C_out x C_in x K], b: [C_out].
inline Tensor conv1d_same(const Tensor& x, const Tensor& w, const Tensor& b) {
    detail::require(x.rank() == 2 && w.rank() == 3 && b.rank() == 1,
                    "conv1d_same expects x[C_in x L], w[C_out x C_in x K], b[C_out]");
    const std::size_t c_in = x.dim(0), len = x.dim(1);
    const std::size_t c_out = w.dim(0), k = w.dim(2);
    detail::require(w.dim(1) == c_in, "conv1d_same: weight C_in " + std::to_string(w.dim(1)) +
                                          " != input channels " + std::to_string(c_in));
    detail::require(b.dim(0) == c_out, "conv1d_same: bias length != C_out");
    detail::require(k % 2 == 1, "conv1d_same: kernel size must be odd");
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto n = static_cast<std::ptrdiff_t>(len);

    Tensor y({c_out, len});
    for (std::size_t co = 0; co < c_out; ++co) {
        float* out = &y.at(co, 0);
        std::fill(out, out + len, b[co]);
        for (std::size_t ci = 0; ci < c_in; ++ci) {
            const float* in = &x.at(ci, 0);
            for (std::size_t kk = 0; kk < k; ++kk) {
                const float wv = w.at(co, ci, kk);
                const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - pad;
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
                const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, n - off);
                for (std::ptrdiff_t t = lo; t < hi; ++t) out[t] += wv * in[t + off];
            }
        }
    }
    return detail::checked(std::move(y), "conv1d_same");
}

/// y = gamma * (x - mean) / sqrt(var + eps) + beta, per channel (row).
inline Tensor batchnorm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                              const Tensor& var, float eps) {
    detail::require(x.rank() == 2, "batchnorm_infer expects x[C x L]");
    const std::size_t c = x.dim(0), len = x.dim(1);
    for (const Tensor* p : {&gamma, &beta, &mean, &var})
        detail::require(p->rank() == 1 && p->dim(0) == c, "batchnorm_infer: parameter length != C");
    Tensor y({c, len});
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float scale = gamma[ch] / std::sqrt(var[ch] + eps);
        for (std::size_t t = 0; t < len; ++t) y.at(ch, t) = scale * (x.at(ch, t) - mean[ch]) + beta[ch];
    }
    return detail::checked(std::move(y), "batchnorm_infer");
}

inline Tensor relu(Tensor x) {
    for (float& v : x.data()) v = v > 0.0f ? v : 0.0f;
    return x;
}

inline Tensor add(const Tensor& x, const Tensor& y) {
    detail::require(x.shape() == y.shape(),
                    "add: shapes " + shape_string(x.shape()) + " and " + shape_string(y.shape()) + " differ");
    Tensor z = x;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += y[i];
    return detail::checked(std::move(z), "add");
}

/// w[M x N] . x[N] + b[M]. Any-rank x is accepted and read flat (row-major
/// flatten), which is how the classifier consumes a [C x L] activation.
inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    detail::require(w.rank() == 2 && b.rank() == 1, "dense expects w[M x N], b[M]");
    const std::size_t m = w.dim(0), n = w.dim(1);
    detail::require(x.size() == n, "dense: input length " + std::to_string(x.size()) + " != N " + std::to_string(n));
    detail::require(b.dim(0) == m, "dense: bias length != M");
    Tensor y({m});
    for (std::size_t i = 0; i < m; ++i) {
        const float* row = &w.at(i, 0);
        float acc = 0.0f;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
        y[i] = acc + b[i];
    }
    return detail::checked(std::move(y), "dense");
}

inline Tensor softmax(const Tensor& z) {
    if (!z.all_finite()) fail(ErrorKind::NonFiniteInput, "softmax input contains NaN or Inf");
    Tensor p = z;
    const float mx = *std::max_element(p.data().begin(), p.data().end());
    float sum = 0.0f;
    for (float& v : p.data()) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (float& v : p.data()) v /= sum;
    return p;
}

inline std::size_t argmax(const Tensor& z) {
    return static_cast<std::size_t>(std::distance(z.data().begin(), std::max_element(z.data().begin(), z.data().end())));
}

}  // namespace edgefit
