#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cgleval/errors.hpp"
#include "cgleval/grid.hpp"

namespace cgleval {

/// Minimal dense row-major matrix. Just enough for the forward-pass kernels.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows(rows), cols(cols), a(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows(rows), cols(cols), a(std::move(data)) {
        if (a.size() != rows * cols) throw InvalidParameter("matrix data length mismatch");
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
    if (x.cols != y.rows)
        throw DimensionMismatch("matmul: " + std::to_string(x.rows) + "x" +
                                std::to_string(x.cols) + " times " + std::to_string(y.rows) +
                                "x" + std::to_string(y.cols));
    Matrix out(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double xv = x.at(i, k);
            for (std::size_t j = 0; j < y.cols; ++j) out.at(i, j) += xv * y.at(k, j);
        }
    return out;
}

/// Sequence of `length` feature vectors of dimension `dim` (one per row).
/// origin_shape remembers the (d, h, w) feature-volume layout the sequence
/// was flattened from, so it can be reshaped back.
struct FeatureSeq {
    std::size_t length = 0, dim = 0;
    std::vector<double> data; // length x dim, row-major
    std::optional<std::array<std::size_t, 3>> origin_shape; // (d, h, w)

    FeatureSeq() = default;
    FeatureSeq(std::size_t length, std::size_t dim, std::vector<double> values,
               std::optional<std::array<std::size_t, 3>> origin = std::nullopt)
        : length(length), dim(dim), data(std::move(values)), origin_shape(origin) {
        if (data.size() != length * dim) throw InvalidParameter("feature data length mismatch");
        if (origin_shape && (*origin_shape)[1] * (*origin_shape)[2] != length)
            throw InvalidParameter("origin_shape spatial extent does not match sequence length");
    }
    FeatureSeq(std::size_t length, std::size_t dim)
        : length(length), dim(dim), data(length * dim, 0.0) {}

    double at(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
    double& at(std::size_t i, std::size_t j) { return data[i * dim + j]; }

    friend bool operator==(const FeatureSeq&, const FeatureSeq&) = default;
};

/// One attention head's projections: W_Q, W_K, W_V, each model_dim x head_dim.
struct HeadParams {
    Matrix w_q, w_k, w_v;
};

/// Multi-head attention parameters. w_o is (heads*head_dim) x model_dim.
struct AttentionParams {
    std::size_t heads = 0, model_dim = 0, head_dim = 0;
    std::vector<HeadParams> head;
    Matrix w_o;
    std::uint64_t seed = 0;
};

namespace detail {

// Deterministic init: mt19937_64(seed); u = (next() >> 11) * 2^-53 in [0,1);
// entry = (2u - 1) / sqrt(model_dim). Matrices are filled row-major, in order
// W_Q, W_K, W_V per head (head 0 first), then W_o. Bit-reproducible anywhere.
class SeededUniform {
public:
    explicit SeededUniform(std::uint64_t seed) : rng_(seed) {}
    double next() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 rng_;
};

inline Matrix seq_as_matrix(const FeatureSeq& s) {
    return Matrix(s.length, s.dim, s.data);
}

} // namespace detail

inline AttentionParams make_attention_params(std::uint64_t seed, std::size_t heads,
                                             std::size_t model_dim, std::size_t head_dim) {
    if (heads == 0 || model_dim == 0 || head_dim == 0)
        throw InvalidParameter("heads, model_dim and head_dim must be positive");
    AttentionParams params;
    params.heads = heads;
    params.model_dim = model_dim;
    params.head_dim = head_dim;
    params.seed = seed;
    detail::SeededUniform u(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(model_dim));
    auto fill = [&](std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (double& v : m.a) v = (2.0 * u.next() - 1.0) * scale;
        return m;
    };
    for (std::size_t i = 0; i < heads; ++i)
        params.head.push_back({fill(model_dim, head_dim), fill(model_dim, head_dim),
                               fill(model_dim, head_dim)});
    params.w_o = fill(heads * head_dim, model_dim);
    return params;
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
inline Matrix softmax_rows(Matrix logits) {
    for (std::size_t i = 0; i < logits.rows; ++i) {
        double mx = logits.at(i, 0);
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            const double e = std::exp(logits.at(i, j) - mx);
            logits.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < logits.cols; ++j) logits.at(i, j) /= sum;
    }
    return logits;
}

/// Scaled pre-softmax attention scores: (Q W_Q)(K W_K)^T / sqrt(d_k).
/// The divisor uses the per-head projection width d_k (= w_q.cols).
inline Matrix attention_logits(const FeatureSeq& q, const FeatureSeq& k, const HeadParams& head) {
    if (q.dim != head.w_q.rows || k.dim != head.w_k.rows)
        throw DimensionMismatch("attention_logits: feature dim does not match projections");
    if (head.w_q.cols != head.w_k.cols)
        throw DimensionMismatch("attention_logits: W_Q and W_K widths differ");
    const Matrix qp = matmul(detail::seq_as_matrix(q), head.w_q);
    const Matrix kp = matmul(detail::seq_as_matrix(k), head.w_k);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(head.w_q.cols));
    Matrix logits(q.length, k.length);
    for (std::size_t i = 0; i < q.length; ++i)
        for (std::size_t j = 0; j < k.length; ++j) {
            double dot = 0.0;
            for (std::size_t m = 0; m < qp.cols; ++m) dot += qp.at(i, m) * kp.at(j, m);
            logits.at(i, j) = dot * inv_sqrt_dk;
        }
    return logits;
}

/// softmax(attention_logits): each row sums to 1.
inline Matrix attention_weights(const FeatureSeq& q, const FeatureSeq& k,
                                const HeadParams& head) {
    return softmax_rows(attention_logits(q, k, head));
}

/// softmax(Q W_Q (K W_K)^T / sqrt(d_k)) V W_V for one head.
/// Output: q.length x d_k.
inline FeatureSeq spda(const FeatureSeq& q, const FeatureSeq& k, const FeatureSeq& v,
                       const HeadParams& head) {
    if (k.length != v.length)
        throw DimensionMismatch("spda: key/value lengths differ (" + std::to_string(k.length) +
                                " vs " + std::to_string(v.length) + ")");
    if (v.dim != head.w_v.rows)
        throw DimensionMismatch("spda: value dim does not match W_V");
    const Matrix weights = attention_weights(q, k, head);
    const Matrix vp = matmul(detail::seq_as_matrix(v), head.w_v);
    const Matrix out = matmul(weights, vp);
    return FeatureSeq(out.rows, out.cols, out.a, q.origin_shape);
}

/// concat(H_1..H_h) W_o with H_i the per-head spda outputs.
/// Output: q.length x model_dim; origin_shape follows the query.
inline FeatureSeq multi_head_attention(const FeatureSeq& q, const FeatureSeq& k,
                                       const FeatureSeq& v, const AttentionParams& params) {
    if (params.head.size() != params.heads || params.heads == 0)
        throw InvalidParameter("attention params carry no heads");
    if (params.w_o.rows != params.heads * params.head_dim)
        throw DimensionMismatch("W_o rows must equal heads*head_dim");
    Matrix concat(q.length, params.heads * params.head_dim);
    for (std::size_t hi = 0; hi < params.heads; ++hi) {
        const FeatureSeq part = spda(q, k, v, params.head[hi]);
        if (part.dim != params.head_dim)
            throw DimensionMismatch("head output width differs from head_dim");
        for (std::size_t i = 0; i < q.length; ++i)
            for (std::size_t j = 0; j < params.head_dim; ++j)
                concat.at(i, hi * params.head_dim + j) = part.at(i, j);
    }
    const Matrix out = matmul(concat, params.w_o);
    return FeatureSeq(out.rows, out.cols, out.a, q.origin_shape);
}

/// Stacked multi-head self-attention: Q = K = V = current sequence.
inline FeatureSeq self_attention_block(const FeatureSeq& f_ad,
                                       const std::vector<AttentionParams>& layers) {
    if (layers.empty()) throw InvalidParameter("self_attention_block needs >= 1 layer");
    FeatureSeq cur = f_ad;
    for (const auto& params : layers) {
        if (params.w_o.cols != f_ad.dim)
            throw DimensionMismatch("self-attention layer must preserve feature dim");
        cur = multi_head_attention(cur, cur, cur, params);
    }
    return cur;
}

/// Stacked cross-attention with the encoder side as query and f_s as key and
/// value, followed by element-wise additive fusion with f_int.
inline FeatureSeq cross_attention_fuse(const FeatureSeq& f_e, const FeatureSeq& f_s,
                                       const FeatureSeq& f_int,
                                       const std::vector<AttentionParams>& layers) {
    if (layers.empty()) throw InvalidParameter("cross_attention_fuse needs >= 1 layer");
    if (f_e.dim != f_s.dim || f_e.dim != f_int.dim)
        throw DimensionMismatch("cross_attention_fuse: feature dims differ");
    if (f_int.length != f_e.length)
        throw DimensionMismatch("cross_attention_fuse: fusion operand length differs");
    FeatureSeq cur = f_e;
    for (const auto& params : layers) {
        if (params.w_o.cols != f_e.dim)
            throw DimensionMismatch("cross-attention layer must preserve feature dim");
        cur = multi_head_attention(cur, f_s, f_s, params);
    }
    FeatureSeq fused(cur.length, cur.dim, cur.data, f_int.origin_shape);
    for (std::size_t i = 0; i < fused.data.size(); ++i) fused.data[i] += f_int.data[i];
    return fused;
}

/// Per-position K-vector logits over an image grid, channel-last:
/// index = (y*width + x)*num_classes + c.
struct LogitsGrid {
    int width = 0, height = 0, num_classes = 0;
    std::vector<double> data;

    LogitsGrid(int width, int height, int num_classes, std::vector<double> values)
        : width(width), height(height), num_classes(num_classes), data(std::move(values)) {
        if (width <= 0 || height <= 0 || num_classes < 2)
            throw InvalidParameter("logits grid needs positive dims and K >= 2");
        if (data.size() !=
            static_cast<std::size_t>(width) * height * static_cast<std::size_t>(num_classes))
            throw InvalidParameter("logits data length mismatch");
    }
    LogitsGrid(int width, int height, int num_classes)
        : LogitsGrid(width, height, num_classes,
                     std::vector<double>(static_cast<std::size_t>(width) * height * num_classes,
                                         0.0)) {}

    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * num_classes + c];
    }
    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * num_classes + c];
    }
};

/// Mean over positions of -log softmax(logits)[gt class], computed via
/// log-sum-exp for stability.
inline double pixel_cross_entropy(const LogitsGrid& logits, const LabelMap& gt) {
    if (logits.width != gt.width() || logits.height != gt.height())
        throw DimensionMismatch("pixel_cross_entropy: logits grid is " +
                                std::to_string(logits.width) + "x" + std::to_string(logits.height) +
                                ", gt is " + std::to_string(gt.width()) + "x" +
                                std::to_string(gt.height()));
    double total = 0.0;
    for (int y = 0; y < logits.height; ++y) {
        for (int x = 0; x < logits.width; ++x) {
            const int cls = gt.at(x, y);
            if (cls >= logits.num_classes)
                throw ClassIdOutOfRange(cls, gt.index(x, y),
                                        "gt class " + std::to_string(cls) +
                                        " is >= logits num_classes " +
                                        std::to_string(logits.num_classes));
            double mx = logits.at(x, y, 0);
            for (int c = 1; c < logits.num_classes; ++c) mx = std::max(mx, logits.at(x, y, c));
            double sum = 0.0;
            for (int c = 0; c < logits.num_classes; ++c)
                sum += std::exp(logits.at(x, y, c) - mx);
            total += mx + std::log(sum) - logits.at(x, y, cls);
        }
    }
    return total / (static_cast<double>(logits.width) * logits.height);
}

/// Weights of the two task losses. Both must be finite and non-negative.
struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
};

/// alpha * l_cgl + beta * l_ss, exactly.
inline double combined_loss(double l_cgl, double l_ss, const LossWeights& w) {
    return w.alpha * l_cgl + w.beta * l_ss;
}

/// d x h x w feature volume, channel-major: index = (c*h + y)*w + x.
struct FeatureVolume {
    std::size_t dim = 0, height = 0, width = 0;
    std::vector<double> data;

    FeatureVolume() = default;
    FeatureVolume(std::size_t dim, std::size_t height, std::size_t width,
                  std::vector<double> values)
        : dim(dim), height(height), width(width), data(std::move(values)) {
        if (dim == 0 || height == 0 || width == 0)
            throw InvalidParameter("feature volume dims must be positive");
        if (data.size() != dim * height * width)
            throw InvalidParameter("feature volume data length mismatch");
    }
    FeatureVolume(std::size_t dim, std::size_t height, std::size_t width)
        : FeatureVolume(dim, height, width, std::vector<double>(dim * height * width, 0.0)) {}

    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * height + y) * width + x];
    }
    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * height + y) * width + x];
    }

    friend bool operator==(const FeatureVolume&, const FeatureVolume&) = default;
};

/// Row-major spatial flattening: position (r,c) -> sequence index r*w + c,
/// with the d channel values gathered into one feature vector.
inline FeatureSeq seq_from_volume(const FeatureVolume& volume) {
    FeatureSeq seq(volume.height * volume.width, volume.dim);
    seq.origin_shape = {{volume.dim, volume.height, volume.width}};
    for (std::size_t y = 0; y < volume.height; ++y)
        for (std::size_t x = 0; x < volume.width; ++x)
            for (std::size_t c = 0; c < volume.dim; ++c)
                seq.at(y * volume.width + x, c) = volume.at(c, y, x);
    return seq;
}

/// Inverse of seq_from_volume; requires origin_shape.
inline FeatureVolume volume_from_seq(const FeatureSeq& seq) {
    if (!seq.origin_shape)
        throw InvalidParameter("volume_from_seq: sequence has no origin_shape");
    const auto [d, h, w] = *seq.origin_shape;
    if (d != seq.dim || h * w != seq.length)
        throw DimensionMismatch("volume_from_seq: origin_shape inconsistent with sequence");
    FeatureVolume volume(d, h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < d; ++c)
                volume.at(c, y, x) = seq.at(y * w + x, c);
    return volume;
}

} // namespace cgleval
