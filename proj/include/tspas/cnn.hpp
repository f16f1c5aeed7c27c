#pragma once

// Convolutional selector network: eight (Conv 3x3 -> GroupNorm -> ReLU)
// blocks, global average pooling, dropout and a two-way linear head, with
// hand-written backward passes, Adam and a cross-validated training driver.
//
// Layers work on one sample at a time (GroupNorm does not mix samples), so
// a batch is processed item by item and gradients are reduced in item
// order. Everything is templated on the scalar: float for training, double
// for finite-difference checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tspas/parallel.hpp"
#include "tspas/rendering.hpp"
#include "tspas/scoring.hpp"
#include "tspas/selection.hpp"

namespace tspas::cnn {

// ---------------------------------------------------------------------------
// Architecture

inline constexpr std::size_t kKernel = 3;
inline constexpr std::array<std::size_t, 8> kBlockChannels = {32, 32, 64, 64, 128, 128, 256, 256};
inline constexpr std::array<std::size_t, 8> kBlockStrides = {1, 2, 1, 2, 1, 2, 1, 1};
inline constexpr std::array<std::size_t, 8> kBlockDilations = {1, 1, 2, 2, 3, 3, 1, 1};
inline constexpr std::size_t kDefaultGroups = 8;
inline constexpr double kDefaultDropout = 0.25;
inline constexpr double kDefaultGnEps = 1e-5;
inline constexpr std::size_t kOutputs = 2;  // P(EAX), P(LKH)

/// 3x3 convolution with "same" zero padding (pad = dilation), so the output
/// is ceil(H / stride) x ceil(W / stride).
struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t stride = 1;
    std::size_t dilation = 1;

    [[nodiscard]] std::size_t padding() const { return dilation; }
    [[nodiscard]] std::size_t weight_count() const { return out_channels * in_channels * kKernel * kKernel; }

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

inline std::size_t conv_output_size(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

struct NetworkSpec {
    std::size_t in_channels = 1;
    std::vector<ConvSpec> blocks;
    std::size_t groups = kDefaultGroups;
    double dropout = kDefaultDropout;
    double gn_eps = kDefaultGnEps;

    /// The eight-block schedule: channels 32,32,64,64,128,128,256,256,
    /// strides 1,2,1,2,1,2,1,1, dilations 1,1,2,2,3,3,1,1.
    static NetworkSpec standard(std::size_t in_channels) {
        NetworkSpec s;
        s.in_channels = in_channels;
        std::size_t c = in_channels;
        for (std::size_t b = 0; b < kBlockChannels.size(); ++b) {
            s.blocks.push_back({c, kBlockChannels[b], kBlockStrides[b], kBlockDilations[b]});
            c = kBlockChannels[b];
        }
        return s;
    }

    /// First `n_blocks` blocks of the standard schedule with every width set
    /// to `width`; used for small-scale gradient checks.
    static NetworkSpec reduced(std::size_t in_channels, std::size_t n_blocks, std::size_t width,
                               std::size_t groups = kDefaultGroups) {
        NetworkSpec s;
        s.in_channels = in_channels;
        s.groups = groups;
        std::size_t c = in_channels;
        for (std::size_t b = 0; b < n_blocks; ++b) {
            s.blocks.push_back({c, width, kBlockStrides[b], kBlockDilations[b]});
            c = width;
        }
        return s;
    }

    [[nodiscard]] std::size_t feature_dim() const {
        return blocks.empty() ? in_channels : blocks.back().out_channels;
    }

    void validate() const {
        if (blocks.empty()) throw std::invalid_argument("network needs at least one block");
        if (groups == 0) throw std::invalid_argument("group count must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0,1)");
        std::size_t c = in_channels;
        for (const auto& b : blocks) {
            if (b.in_channels != c) throw std::invalid_argument("block input channels do not chain");
            if (b.out_channels % groups != 0)
                throw std::invalid_argument("group count " + std::to_string(groups) +
                                            " does not divide " + std::to_string(b.out_channels) +
                                            " channels");
            if (b.stride == 0 || b.dilation == 0) throw std::invalid_argument("stride/dilation >= 1");
            c = b.out_channels;
        }
    }

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct BlockShape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

/// Output shape of every block for an H x W input.
inline std::vector<BlockShape> shape_schedule(const NetworkSpec& spec, std::size_t height, std::size_t width) {
    std::vector<BlockShape> out;
    for (const auto& b : spec.blocks) {
        height = conv_output_size(height, b.stride);
        width = conv_output_size(width, b.stride);
        out.push_back({b.out_channels, height, width});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameter layout: one flat vector, block by block (conv weight, conv bias,
// GN scale, GN shift), then the linear head (weight kOutputs x D, bias).

struct BlockOffsets {
    std::size_t weight = 0, bias = 0, gamma = 0, beta = 0;
};

struct ParamLayout {
    std::vector<BlockOffsets> blocks;
    std::size_t linear_weight = 0;
    std::size_t linear_bias = 0;
    std::size_t total = 0;

    explicit ParamLayout(const NetworkSpec& spec) {
        std::size_t at = 0;
        for (const auto& b : spec.blocks) {
            BlockOffsets o;
            o.weight = at;
            at += b.weight_count();
            o.bias = at;
            at += b.out_channels;
            o.gamma = at;
            at += b.out_channels;
            o.beta = at;
            at += b.out_channels;
            blocks.push_back(o);
        }
        linear_weight = at;
        at += kOutputs * spec.feature_dim();
        linear_bias = at;
        at += kOutputs;
        total = at;
    }
};

template <typename T>
struct Params {
    NetworkSpec spec;
    ParamLayout layout;
    std::vector<T> values;

    explicit Params(NetworkSpec s) : spec(std::move(s)), layout(spec), values(layout.total, T(0)) {
        spec.validate();
    }

    [[nodiscard]] std::span<const T> slice(std::size_t offset, std::size_t count) const {
        return {values.data() + offset, count};
    }
    [[nodiscard]] std::span<T> slice(std::size_t offset, std::size_t count) {
        return {values.data() + offset, count};
    }

    template <typename U>
    [[nodiscard]] Params<U> cast() const {
        Params<U> p(spec);
        std::transform(values.begin(), values.end(), p.values.begin(),
                       [](T v) { return static_cast<U>(v); });
        return p;
    }
};

/// Number of parameters of one block's convolution (weights + biases).
inline std::size_t conv_param_count(const ConvSpec& c) { return c.weight_count() + c.out_channels; }

/// He (fan-in) normal initialisation for conv and linear weights; zero
/// biases, unit GN scale, zero GN shift.
template <typename T>
Params<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
    Params<T> p(spec);
    std::mt19937_64 rng(seed);
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        const auto& cs = spec.blocks[b];
        const auto& o = p.layout.blocks[b];
        std::normal_distribution<double> w(0.0, std::sqrt(2.0 / static_cast<double>(cs.in_channels * 9)));
        for (std::size_t i = 0; i < cs.weight_count(); ++i) p.values[o.weight + i] = static_cast<T>(w(rng));
        for (std::size_t c = 0; c < cs.out_channels; ++c) p.values[o.gamma + c] = T(1);
    }
    std::normal_distribution<double> w(0.0, std::sqrt(2.0 / static_cast<double>(spec.feature_dim())));
    for (std::size_t i = 0; i < kOutputs * spec.feature_dim(); ++i)
        p.values[p.layout.linear_weight + i] = static_cast<T>(w(rng));
    return p;
}

// ---------------------------------------------------------------------------
// Layers

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
    ConvSpec spec;
    std::size_t height = 0;  // input
    std::size_t width = 0;

    [[nodiscard]] std::size_t out_height() const { return conv_output_size(height, spec.stride); }
    [[nodiscard]] std::size_t out_width() const { return conv_output_size(width, spec.stride); }
    [[nodiscard]] std::size_t out_pixels() const { return out_height() * out_width(); }
    [[nodiscard]] std::size_t col_rows() const { return spec.in_channels * kKernel * kKernel; }
};

/// col[(c*9 + ky*3 + kx)][oy*W' + ox] = in[c][oy*s - p + ky*d][ox*s - p + kx*d] (0 outside).
template <typename T>
void im2col(const ConvGeometry& g, std::span<const T> in, std::span<T> col) {
    const auto oh = g.out_height(), ow = g.out_width();
    const auto s = static_cast<std::ptrdiff_t>(g.spec.stride);
    const auto d = static_cast<std::ptrdiff_t>(g.spec.dilation);
    const auto pad = static_cast<std::ptrdiff_t>(g.spec.padding());
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    std::size_t r = 0;
    for (std::size_t c = 0; c < g.spec.in_channels; ++c) {
        const T* plane = in.data() + c * g.height * g.width;
        for (std::ptrdiff_t ky = 0; ky < 3; ++ky)
            for (std::ptrdiff_t kx = 0; kx < 3; ++kx, ++r) {
                T* dst = col.data() + r * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - pad + ky * d;
                    T* row = dst + oy * ow;
                    if (iy < 0 || iy >= H) {
                        std::fill(row, row + ow, T(0));
                        continue;
                    }
                    const T* src = plane + iy * W;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - pad + kx * d;
                        row[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
    }
}

/// Adjoint of im2col: din = sum of col entries scattered back (din overwritten).
template <typename T>
void col2im(const ConvGeometry& g, std::span<const T> col, std::span<T> din) {
    std::fill(din.begin(), din.end(), T(0));
    const auto oh = g.out_height(), ow = g.out_width();
    const auto s = static_cast<std::ptrdiff_t>(g.spec.stride);
    const auto d = static_cast<std::ptrdiff_t>(g.spec.dilation);
    const auto pad = static_cast<std::ptrdiff_t>(g.spec.padding());
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    std::size_t r = 0;
    for (std::size_t c = 0; c < g.spec.in_channels; ++c) {
        T* plane = din.data() + c * g.height * g.width;
        for (std::ptrdiff_t ky = 0; ky < 3; ++ky)
            for (std::ptrdiff_t kx = 0; kx < 3; ++kx, ++r) {
                const T* src = col.data() + r * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - pad + ky * d;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = plane + iy * W;
                    const T* row = src + oy * ow;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - pad + kx * d;
                        if (ix >= 0 && ix < W) dst[ix] += row[ox];
                    }
                }
            }
    }
}

/// out[Cout][H'W'] = weight[Cout][Cin*9] x col + bias. `col` receives the
/// im2col matrix (kept for the backward pass).
template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> col, std::span<T> out) {
    const auto K = static_cast<Eigen::Index>(g.col_rows());
    const auto N = static_cast<Eigen::Index>(g.out_pixels());
    const auto M = static_cast<Eigen::Index>(g.spec.out_channels);
    if (in.size() != g.spec.in_channels * g.height * g.width || weight.size() != g.spec.weight_count() ||
        bias.size() != g.spec.out_channels || col.size() != static_cast<std::size_t>(K * N) ||
        out.size() != static_cast<std::size_t>(M * N))
        throw std::invalid_argument("conv2d_forward: shape mismatch");
    im2col<T>(g, in, col);
    Eigen::Map<const RowMat<T>> Wm(weight.data(), M, K);
    Eigen::Map<const RowMat<T>> Cm(col.data(), K, N);
    Eigen::Map<RowMat<T>> Om(out.data(), M, N);
    Om.noalias() = Wm * Cm;
    for (Eigen::Index m = 0; m < M; ++m) Om.row(m).array() += bias[static_cast<std::size_t>(m)];
}

/// Convenience form allocating the outputs.
template <typename T>
std::vector<T> conv2d_forward(const ConvGeometry& g, std::span<const T> in, std::span<const T> weight,
                              std::span<const T> bias) {
    std::vector<T> col(g.col_rows() * g.out_pixels());
    std::vector<T> out(g.spec.out_channels * g.out_pixels());
    conv2d_forward<T>(g, in, weight, bias, col, out);
    return out;
}

/// Accumulates dweight/dbias; writes din unless it is empty. `dcol` is scratch
/// of im2col size (needed only when din is requested).
template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> col, std::span<const T> weight,
                     std::span<const T> dout, std::span<T> dweight, std::span<T> dbias, std::span<T> din,
                     std::span<T> dcol) {
    const auto K = static_cast<Eigen::Index>(g.col_rows());
    const auto N = static_cast<Eigen::Index>(g.out_pixels());
    const auto M = static_cast<Eigen::Index>(g.spec.out_channels);
    Eigen::Map<const RowMat<T>> Dm(dout.data(), M, N);
    Eigen::Map<const RowMat<T>> Cm(col.data(), K, N);
    Eigen::Map<RowMat<T>> dWm(dweight.data(), M, K);
    dWm.noalias() += Dm * Cm.transpose();
    // plain loop: Eigen's vectorised sum peels to the buffer's alignment,
    // which would make the summation order allocation-dependent
    for (std::size_t m = 0; m < static_cast<std::size_t>(M); ++m) {
        T s = T(0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(N); ++i) s += dout[m * static_cast<std::size_t>(N) + i];
        dbias[m] += s;
    }
    if (din.empty()) return;
    Eigen::Map<const RowMat<T>> Wm(weight.data(), M, K);
    Eigen::Map<RowMat<T>> dCm(dcol.data(), K, N);
    dCm.noalias() = Wm.transpose() * Dm;
    col2im<T>(g, dcol, din);
}

/// Group normalisation of one C x HW sample. Writes the normalised values
/// (before the affine step) to xhat, 1/sqrt(var + eps) per group to
/// inv_std, and gamma * xhat + beta to y. x may alias xhat.
template <typename T>
void group_norm_forward(std::size_t C, std::size_t HW, std::size_t G, std::span<const T> x,
                        std::span<const T> gamma, std::span<const T> beta, double eps, std::span<T> xhat,
                        std::span<T> inv_std, std::span<T> y) {
    if (G == 0 || C % G != 0) throw std::invalid_argument("group_norm: groups must divide channels");
    if (x.size() != C * HW || xhat.size() != C * HW || y.size() != C * HW || inv_std.size() != G ||
        gamma.size() != C || beta.size() != C)
        throw std::invalid_argument("group_norm: shape mismatch");
    const std::size_t cpg = C / G;
    const std::size_t n = cpg * HW;
    for (std::size_t g = 0; g < G; ++g) {
        const std::size_t begin = g * n;
        double sum = 0.0;
        for (std::size_t i = begin; i < begin + n; ++i) sum += static_cast<double>(x[i]);
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t i = begin; i < begin + n; ++i) {
            const double dlt = static_cast<double>(x[i]) - mean;
            sq += dlt * dlt;
        }
        const double var = sq / static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[g] = static_cast<T>(is);
        for (std::size_t i = begin; i < begin + n; ++i)
            xhat[i] = static_cast<T>((static_cast<double>(x[i]) - mean) * is);
    }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = c * HW; i < (c + 1) * HW; ++i) y[i] = gamma[c] * xhat[i] + beta[c];
}

/// Gradient of group_norm_forward. dgamma / dbeta accumulate; dx is written.
template <typename T>
void group_norm_backward(std::size_t C, std::size_t HW, std::size_t G, std::span<const T> xhat,
                         std::span<const T> inv_std, std::span<const T> gamma, std::span<const T> dy,
                         std::span<T> dx, std::span<T> dgamma, std::span<T> dbeta) {
    const std::size_t cpg = C / G;
    const std::size_t n = cpg * HW;
    for (std::size_t c = 0; c < C; ++c) {
        double sg = 0.0, sb = 0.0;
        for (std::size_t i = c * HW; i < (c + 1) * HW; ++i) {
            sg += static_cast<double>(dy[i]) * static_cast<double>(xhat[i]);
            sb += static_cast<double>(dy[i]);
        }
        dgamma[c] += static_cast<T>(sg);
        dbeta[c] += static_cast<T>(sb);
    }
    for (std::size_t g = 0; g < G; ++g) {
        double s1 = 0.0, s2 = 0.0;  // sum dxhat, sum dxhat * xhat
        for (std::size_t c = g * cpg; c < (g + 1) * cpg; ++c)
            for (std::size_t i = c * HW; i < (c + 1) * HW; ++i) {
                const double dxh = static_cast<double>(dy[i]) * static_cast<double>(gamma[c]);
                s1 += dxh;
                s2 += dxh * static_cast<double>(xhat[i]);
            }
        const double scale = static_cast<double>(inv_std[g]) / static_cast<double>(n);
        const double dn = static_cast<double>(n);
        for (std::size_t c = g * cpg; c < (g + 1) * cpg; ++c)
            for (std::size_t i = c * HW; i < (c + 1) * HW; ++i) {
                const double dxh = static_cast<double>(dy[i]) * static_cast<double>(gamma[c]);
                dx[i] = static_cast<T>(scale * (dn * dxh - s1 - static_cast<double>(xhat[i]) * s2));
            }
    }
}

template <typename T>
void relu_forward(std::span<T> x) {
    for (auto& v : x) v = v > T(0) ? v : T(0);
}

/// dy := dy * [y > 0], with y the ReLU output.
template <typename T>
void relu_backward(std::span<const T> y, std::span<T> dy) {
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!(y[i] > T(0))) dy[i] = T(0);
}

/// Per-channel spatial mean: C x HW -> C.
template <typename T>
void global_avg_pool_forward(std::size_t C, std::size_t HW, std::span<const T> x, std::span<T> out) {
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t i = c * HW; i < (c + 1) * HW; ++i) s += static_cast<double>(x[i]);
        out[c] = static_cast<T>(s / static_cast<double>(HW));
    }
}

template <typename T>
void global_avg_pool_backward(std::size_t C, std::size_t HW, std::span<const T> dout, std::span<T> dx) {
    for (std::size_t c = 0; c < C; ++c) {
        const T g = dout[c] / static_cast<T>(HW);
        std::fill(dx.begin() + static_cast<std::ptrdiff_t>(c * HW),
                  dx.begin() + static_cast<std::ptrdiff_t>((c + 1) * HW), g);
    }
}

/// Inverted dropout mask: 0 with probability `rate`, else 1/(1-rate).
template <typename T>
void dropout_mask(double rate, std::uint64_t seed, std::span<T> mask) {
    std::mt19937_64 rng(seed);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (auto& m : mask) m = detail::unit_uniform(rng) < rate ? T(0) : keep_scale;
}

/// logits[o] = sum_d W[o][d] x[d] + b[o]
template <typename T>
void linear_forward(std::size_t D, std::span<const T> x, std::span<const T> W, std::span<const T> b,
                    std::span<T> logits) {
    for (std::size_t o = 0; o < logits.size(); ++o) {
        double s = static_cast<double>(b[o]);
        for (std::size_t d = 0; d < D; ++d) s += static_cast<double>(W[o * D + d]) * static_cast<double>(x[d]);
        logits[o] = static_cast<T>(s);
    }
}

/// Accumulates dW, db; writes dx.
template <typename T>
void linear_backward(std::size_t D, std::span<const T> x, std::span<const T> W, std::span<const T> dlogits,
                     std::span<T> dW, std::span<T> db, std::span<T> dx) {
    for (std::size_t d = 0; d < D; ++d) dx[d] = T(0);
    for (std::size_t o = 0; o < dlogits.size(); ++o) {
        db[o] += dlogits[o];
        for (std::size_t d = 0; d < D; ++d) {
            dW[o * D + d] += dlogits[o] * x[d];
            dx[d] += W[o * D + d] * dlogits[o];
        }
    }
}

template <typename T>
std::array<T, kOutputs> softmax(const std::array<T, kOutputs>& logits) {
    const T mx = std::max(logits[0], logits[1]);
    const T e0 = std::exp(logits[0] - mx);
    const T e1 = std::exp(logits[1] - mx);
    const T z = e0 + e1;
    return {e0 / z, e1 / z};
}

/// -log softmax(logits)[label], computed stably.
template <typename T>
T cross_entropy(const std::array<T, kOutputs>& logits, std::size_t label) {
    const T mx = std::max(logits[0], logits[1]);
    const T lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
    return lse - logits[label];
}

/// d CE / d logits = probs - onehot(label).
template <typename T>
std::array<T, kOutputs> cross_entropy_grad(const std::array<T, kOutputs>& logits, std::size_t label) {
    auto p = softmax(logits);
    p[label] -= T(1);
    return p;
}

inline std::size_t class_index(Solver s) { return index_of(s); }

// ---------------------------------------------------------------------------
// Whole network, one sample

template <typename T>
struct SampleTrace {
    struct Block {
        ConvGeometry geometry;
        std::vector<T> col;
        std::vector<T> xhat;
        std::vector<T> inv_std;
        std::vector<T> y;  // post-ReLU
    };
    std::vector<Block> blocks;
    std::vector<T> pooled;
    std::vector<T> mask;     // dropout mask (all ones at inference)
    std::vector<T> dropped;  // pooled * mask
    std::array<T, kOutputs> logits{};
    std::array<T, kOutputs> probs{};
};

/// Runs one C x H x W sample through the network, recording what the
/// backward pass needs. Dropout is active only when `training`.
template <typename T>
void forward_sample(const Params<T>& P, std::span<const T> input, std::size_t height, std::size_t width,
                    bool training, std::uint64_t dropout_seed, SampleTrace<T>& tr) {
    const auto& spec = P.spec;
    if (input.size() != spec.in_channels * height * width)
        throw std::invalid_argument("forward: input has " + std::to_string(input.size()) +
                                    " values, expected " + std::to_string(spec.in_channels) + "x" +
                                    std::to_string(height) + "x" + std::to_string(width));
    tr.blocks.resize(spec.blocks.size());
    std::span<const T> x = input;
    std::size_t h = height, w = width;
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        auto& blk = tr.blocks[b];
        const auto& o = P.layout.blocks[b];
        const auto& cs = spec.blocks[b];
        blk.geometry = {cs, h, w};
        const std::size_t hw = blk.geometry.out_pixels();
        blk.col.resize(blk.geometry.col_rows() * hw);
        blk.xhat.resize(cs.out_channels * hw);
        blk.y.resize(cs.out_channels * hw);
        blk.inv_std.resize(spec.groups);
        conv2d_forward<T>(blk.geometry, x, P.slice(o.weight, cs.weight_count()), P.slice(o.bias, cs.out_channels),
                          blk.col, blk.xhat);
        group_norm_forward<T>(cs.out_channels, hw, spec.groups, blk.xhat, P.slice(o.gamma, cs.out_channels),
                              P.slice(o.beta, cs.out_channels), spec.gn_eps, blk.xhat, blk.inv_std, blk.y);
        relu_forward<T>(blk.y);
        x = blk.y;
        h = blk.geometry.out_height();
        w = blk.geometry.out_width();
    }
    const std::size_t D = spec.feature_dim();
    tr.pooled.resize(D);
    tr.mask.assign(D, T(1));
    tr.dropped.resize(D);
    global_avg_pool_forward<T>(D, h * w, x, tr.pooled);
    if (training && spec.dropout > 0.0) dropout_mask<T>(spec.dropout, dropout_seed, tr.mask);
    for (std::size_t d = 0; d < D; ++d) tr.dropped[d] = tr.pooled[d] * tr.mask[d];
    linear_forward<T>(D, tr.dropped, P.slice(P.layout.linear_weight, kOutputs * D),
                      P.slice(P.layout.linear_bias, kOutputs), tr.logits);
    tr.probs = softmax(tr.logits);
}

template <typename T>
struct BackwardScratch {
    std::vector<T> dy;
    std::vector<T> dz;
    std::vector<T> dcol;
    std::vector<T> dprev;
};

/// Accumulates `scale` * d CE(sample) / d params into grad; returns the
/// sample's (unscaled) loss.
template <typename T>
T backward_sample(const Params<T>& P, const SampleTrace<T>& tr, std::size_t label, T scale, std::span<T> grad,
                  BackwardScratch<T>& s) {
    const auto& spec = P.spec;
    const auto& L = P.layout;
    const std::size_t D = spec.feature_dim();
    const T loss = cross_entropy(tr.logits, label);
    auto dlogits = cross_entropy_grad(tr.logits, label);
    for (auto& v : dlogits) v *= scale;

    std::vector<T> ddropped(D);
    linear_backward<T>(D, tr.dropped, P.slice(L.linear_weight, kOutputs * D), dlogits,
                       grad.subspan(L.linear_weight, kOutputs * D), grad.subspan(L.linear_bias, kOutputs), ddropped);
    std::vector<T> dpooled(D);
    for (std::size_t d = 0; d < D; ++d) dpooled[d] = ddropped[d] * tr.mask[d];

    const auto& last = tr.blocks.back();
    s.dy.resize(last.y.size());
    global_avg_pool_backward<T>(D, last.geometry.out_pixels(), dpooled, s.dy);

    for (std::size_t bi = spec.blocks.size(); bi-- > 0;) {
        const auto& blk = tr.blocks[bi];
        const auto& cs = spec.blocks[bi];
        const auto& o = L.blocks[bi];
        const std::size_t hw = blk.geometry.out_pixels();
        relu_backward<T>(blk.y, s.dy);
        s.dz.resize(s.dy.size());
        group_norm_backward<T>(cs.out_channels, hw, spec.groups, blk.xhat, blk.inv_std,
                               P.slice(o.gamma, cs.out_channels), s.dy, s.dz, grad.subspan(o.gamma, cs.out_channels),
                               grad.subspan(o.beta, cs.out_channels));
        std::span<T> din;
        if (bi > 0) {
            s.dprev.resize(cs.in_channels * blk.geometry.height * blk.geometry.width);
            s.dcol.resize(blk.col.size());
            din = s.dprev;
        }
        conv2d_backward<T>(blk.geometry, blk.col, P.slice(o.weight, cs.weight_count()), s.dz,
                           grad.subspan(o.weight, cs.weight_count()), grad.subspan(o.bias, cs.out_channels), din,
                           s.dcol);
        if (bi > 0) std::swap(s.dy, s.dprev);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Batches

/// B samples of C x H x W, stored contiguously.
template <typename T>
struct Batch {
    std::size_t size = 0, channels = 0, height = 0, width = 0;
    std::vector<T> data;

    [[nodiscard]] std::span<const T> sample(std::size_t b) const {
        const std::size_t n = channels * height * width;
        return {data.data() + b * n, n};
    }
};

template <typename T>
Batch<T> make_batch(std::span<const ImageTensor* const> images) {
    Batch<T> batch;
    if (images.empty()) return batch;
    batch.size = images.size();
    batch.channels = images[0]->channels;
    batch.height = images[0]->height;
    batch.width = images[0]->width;
    batch.data.reserve(batch.size * batch.channels * batch.height * batch.width);
    for (const auto* img : images) {
        if (img->channels != batch.channels || img->height != batch.height || img->width != batch.width)
            throw std::invalid_argument("make_batch: images differ in shape");
        for (float v : img->data) batch.data.push_back(static_cast<T>(v));
    }
    return batch;
}

template <typename T>
struct ForwardResult {
    std::vector<std::array<T, kOutputs>> logits;
    std::vector<std::array<T, kOutputs>> probs;
};

/// Batch forward. In training mode sample b uses dropout seed
/// derive_seed(dropout_seed, b).
template <typename T>
ForwardResult<T> forward(const Params<T>& P, const Batch<T>& batch, bool training, std::uint64_t dropout_seed = 0,
                         std::size_t jobs = 1) {
    if (batch.channels != P.spec.in_channels)
        throw std::invalid_argument("forward: batch has " + std::to_string(batch.channels) +
                                    " channels, network expects " + std::to_string(P.spec.in_channels));
    ForwardResult<T> out;
    out.logits.resize(batch.size);
    out.probs.resize(batch.size);
    parallel_for(batch.size, jobs, [&](std::size_t b) {
        SampleTrace<T> tr;
        forward_sample<T>(P, batch.sample(b), batch.height, batch.width, training, derive_seed(dropout_seed, b), tr);
        out.logits[b] = tr.logits;
        out.probs[b] = tr.probs;
    });
    return out;
}

/// Mean cross-entropy of a batch (training-mode dropout with the given seed).
template <typename T>
T batch_loss(const Params<T>& P, const Batch<T>& batch, std::span<const std::size_t> labels,
             std::uint64_t dropout_seed, bool training = true) {
    const auto fw = forward<T>(P, batch, training, dropout_seed);
    T s = T(0);
    for (std::size_t b = 0; b < batch.size; ++b) s += cross_entropy(fw.logits[b], labels[b]);
    return s / static_cast<T>(batch.size);
}

template <typename T>
struct BackwardResult {
    T loss = T(0);
    std::vector<T> grad;
    std::vector<std::array<T, kOutputs>> probs;
};

/// Exact gradient of the mean batch cross-entropy (training mode). Per-sample
/// gradients are reduced in sample order, so the result does not depend on
/// `jobs`.
template <typename T>
BackwardResult<T> backward(const Params<T>& P, const Batch<T>& batch, std::span<const std::size_t> labels,
                           std::uint64_t dropout_seed, std::size_t jobs = 1) {
    if (labels.size() != batch.size) throw std::invalid_argument("backward: label count mismatch");
    if (batch.channels != P.spec.in_channels)
        throw std::invalid_argument("backward: channel mismatch");
    const T scale = T(1) / static_cast<T>(batch.size);
    std::vector<std::vector<T>> grads(batch.size);
    std::vector<T> losses(batch.size);
    BackwardResult<T> out;
    out.probs.resize(batch.size);
    parallel_for(batch.size, jobs, [&](std::size_t b) {
        SampleTrace<T> tr;
        BackwardScratch<T> scratch;
        forward_sample<T>(P, batch.sample(b), batch.height, batch.width, true, derive_seed(dropout_seed, b), tr);
        grads[b].assign(P.values.size(), T(0));
        losses[b] = backward_sample<T>(P, tr, labels[b], scale, grads[b], scratch);
        out.probs[b] = tr.probs;
    });
    out.grad = std::move(grads[0]);
    for (std::size_t b = 1; b < batch.size; ++b)
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += grads[b][i];
    for (auto l : losses) out.loss += l;
    out.loss /= static_cast<T>(batch.size);
    return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class Adam {
public:
    Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    /// One bias-corrected update.
    void step(std::span<T> params, std::span<const T> grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = static_cast<double>(grad[i]);
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
            const double update = cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
            params[i] = static_cast<T>(static_cast<double>(params[i]) - update);
        }
    }

    [[nodiscard]] std::size_t steps() const { return t_; }

private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    std::size_t batch_size = 8;
    AdamConfig adam;
    std::size_t max_epochs = 100;
    /// Early stopping on validation loss; 0 disables it.
    std::size_t patience = 10;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
};

struct LabeledImage {
    const ImageTensor* image = nullptr;
    Solver label = Solver::EAX;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_acc;
};

struct TrainResult {
    Params<float> params;
    std::vector<EpochMetrics> history;
    std::size_t best_epoch = 0;
};

/// Mean loss and accuracy (argmax) at inference.
inline std::pair<double, double> evaluate_loss(const Params<float>& P, const std::vector<LabeledImage>& data,
                                               std::size_t batch_size, std::size_t jobs) {
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        std::vector<const ImageTensor*> imgs;
        for (std::size_t i = start; i < end; ++i) imgs.push_back(data[i].image);
        const auto fw = forward<float>(P, make_batch<float>(imgs), false, 0, jobs);
        for (std::size_t i = start; i < end; ++i) {
            const auto label = class_index(data[i].label);
            loss += static_cast<double>(cross_entropy(fw.logits[i - start], label));
            const std::size_t pred = fw.probs[i - start][1] > fw.probs[i - start][0] ? 1 : 0;
            correct += pred == label;
        }
    }
    const auto n = static_cast<double>(data.size());
    return {loss / n, static_cast<double>(correct) / n};
}

/// Mini-batch Adam on mean cross-entropy. Batches are reshuffled each epoch
/// from derive_seed(seed, epoch). With a validation set, training stops
/// after `patience` epochs without a lower validation loss and the best
/// parameters are returned.
inline TrainResult train(const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& val_set,
                         const NetworkSpec& spec, const TrainConfig& cfg) {
    if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(cfg.adam.lr >= 0.0)) throw std::invalid_argument("train: learning rate must be >= 0");
    const auto n_eax = std::count_if(train_set.begin(), train_set.end(),
                                     [](const LabeledImage& s) { return s.label == Solver::EAX; });
    if (n_eax == 0 || n_eax == static_cast<std::ptrdiff_t>(train_set.size()))
        throw std::invalid_argument("train: both classes must be present");
    for (const auto& s : train_set)
        if (s.image->channels != spec.in_channels)
            throw std::invalid_argument("train: image '" + s.image->id + "' has " +
                                        std::to_string(s.image->channels) + " channels, network expects " +
                                        std::to_string(spec.in_channels));

    TrainResult result{init_params<float>(spec, cfg.seed), {}, 0};
    Adam<float> adam(result.params.values.size(), cfg.adam);
    std::optional<Params<float>> best;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 1000003 + epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const ImageTensor*> imgs;
            std::vector<std::size_t> labels;
            for (std::size_t i = start; i < end; ++i) {
                imgs.push_back(train_set[order[i]].image);
                labels.push_back(class_index(train_set[order[i]].label));
            }
            const auto batch = make_batch<float>(imgs);
            const std::uint64_t dseed = derive_seed(derive_seed(cfg.seed, epoch), batch_index);
            const auto bw = backward<float>(result.params, batch, labels, dseed, cfg.jobs);
            adam.step(result.params.values, bw.grad);
            loss_sum += static_cast<double>(bw.loss) * static_cast<double>(end - start);
            for (std::size_t b = 0; b < labels.size(); ++b)
                correct += (bw.probs[b][1] > bw.probs[b][0] ? 1u : 0u) == labels[b];
        }
        EpochMetrics em;
        em.epoch = epoch + 1;
        em.train_loss = loss_sum / static_cast<double>(order.size());
        em.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
        if (!val_set.empty()) {
            const auto [vl, va] = evaluate_loss(result.params, val_set, cfg.batch_size, cfg.jobs);
            em.val_loss = vl;
            em.val_acc = va;
        }
        result.history.push_back(em);
        if (em.val_loss) {
            if (*em.val_loss < best_val) {
                best_val = *em.val_loss;
                best = result.params;
                result.best_epoch = em.epoch;
                since_best = 0;
            } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
                break;
            }
        } else {
            result.best_epoch = em.epoch;
        }
    }
    if (best) result.params = std::move(*best);
    return result;
}

/// "epoch,train_loss,train_acc,val_loss,val_acc"
inline std::string training_log_csv(const std::vector<EpochMetrics>& history) {
    std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& e : history) {
        out += std::to_string(e.epoch) + "," + tspas::detail::format_double(e.train_loss) + "," +
               tspas::detail::format_double(e.train_acc) + "," +
               (e.val_loss ? tspas::detail::format_double(*e.val_loss) : "") + "," +
               (e.val_acc ? tspas::detail::format_double(*e.val_acc) : "") + "\n";
    }
    return out;
}

/// P(EAX) for each image at inference.
inline std::vector<double> predict_p_eax(const Params<float>& P, std::span<const ImageTensor* const> images,
                                         std::size_t batch_size = 8, std::size_t jobs = 1) {
    std::vector<double> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += batch_size) {
        const std::size_t end = std::min(images.size(), start + batch_size);
        const auto fw = forward<float>(P, make_batch<float>(images.subspan(start, end - start)), false, 0, jobs);
        for (const auto& p : fw.probs) out.push_back(static_cast<double>(p[0]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: text header, then little-endian float32 parameters.

inline std::string encode_checkpoint(const Params<float>& P, std::uint64_t seed, const std::string& note = {}) {
    std::ostringstream h;
    h << "tspas-cnn 1\n"
      << "input_channels " << P.spec.in_channels << "\n"
      << "groups " << P.spec.groups << "\n"
      << "dropout " << tspas::detail::format_double(P.spec.dropout) << "\n"
      << "gn_eps " << tspas::detail::format_double(P.spec.gn_eps) << "\n"
      << "blocks " << P.spec.blocks.size() << "\n";
    for (const auto& b : P.spec.blocks)
        h << "block " << b.out_channels << " " << b.stride << " " << b.dilation << "\n";
    h << "outputs " << kOutputs << "\n"
      << "seed " << seed << "\n";
    if (!note.empty()) h << "config " << note << "\n";
    h << "params " << P.values.size() << "\nend\n";
    std::string out = h.str();
    out.reserve(out.size() + 4 * P.values.size());
    for (float v : P.values) tspas::detail::put_f32le(out, v);
    return out;
}

struct Checkpoint {
    Params<float> params;
    std::uint64_t seed = 0;
    std::string config;
};

inline Checkpoint decode_checkpoint(std::string_view bytes) {
    std::size_t pos = 0;
    auto line = [&]() {
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) throw std::runtime_error("checkpoint: truncated header");
        auto l = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return std::string(l);
    };
    if (line() != "tspas-cnn 1") throw std::runtime_error("checkpoint: bad magic");
    NetworkSpec spec;
    std::uint64_t seed = 0;
    std::string config;
    std::size_t n_params = 0;
    std::size_t c = 0;
    for (;;) {
        const auto l = line();
        if (l == "end") break;
        std::istringstream in(l);
        std::string key;
        in >> key;
        if (key == "input_channels") {
            in >> spec.in_channels;
            c = spec.in_channels;
        } else if (key == "groups") {
            in >> spec.groups;
        } else if (key == "dropout") {
            in >> spec.dropout;
        } else if (key == "gn_eps") {
            in >> spec.gn_eps;
        } else if (key == "blocks" || key == "outputs") {
            std::size_t ignored = 0;
            in >> ignored;
        } else if (key == "block") {
            ConvSpec b;
            b.in_channels = c;
            in >> b.out_channels >> b.stride >> b.dilation;
            c = b.out_channels;
            spec.blocks.push_back(b);
        } else if (key == "seed") {
            in >> seed;
        } else if (key == "config") {
            config = l.size() > 7 ? l.substr(7) : "";
        } else if (key == "params") {
            in >> n_params;
        } else {
            throw std::runtime_error("checkpoint: unknown key '" + key + "'");
        }
        if (in.fail()) throw std::runtime_error("checkpoint: bad line '" + l + "'");
    }
    Checkpoint ck{Params<float>(spec), seed, config};
    if (ck.params.values.size() != n_params || bytes.size() - pos != 4 * n_params)
        throw std::runtime_error("checkpoint: parameter count mismatch");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (std::size_t i = 0; i < n_params; ++i) ck.params.values[i] = tspas::detail::get_f32le(p + 4 * i);
    return ck;
}

// ---------------------------------------------------------------------------
// Image-based selector evaluation

/// Training folds are all folds except the test fold; the fold preceding
/// the test fold (cyclically) is held out of training for threshold tuning
/// and early stopping.
inline std::size_t holdout_fold(std::size_t test_fold, std::size_t n_folds) {
    return (test_fold + n_folds - 1) % n_folds;
}

/// Scores per-fold networks: thresholds are tuned on each fold's holdout
/// slice, test-fold instances are predicted, and PAR10 is aggregated without
/// image-generation cost. `images` follow the table's instance order. A hook
/// replaces network probabilities (e.g. with an oracle).
inline SelectorReport evaluate_cnn_selector(const std::vector<Params<float>>& fold_params,
                                            const std::vector<const ImageTensor*>& images,
                                            const PerformanceTable& table, const FoldAssignment& folds,
                                            double grid_step = 0.01, std::size_t jobs = 1,
                                            const ProbabilityHook& hook = {}, std::string name = "cnn") {
    const std::size_t n = table.size();
    if (images.size() != n || folds.fold_of.size() != n)
        throw std::invalid_argument("evaluate_cnn_selector: inconsistent instance sets");
    for (std::size_t i = 0; i < n; ++i)
        if (images[i] == nullptr) throw std::invalid_argument("missing image for " + table[i].instance_id);
    if (!hook && fold_params.size() != folds.n_folds)
        throw std::invalid_argument("evaluate_cnn_selector: need one parameter set per fold");

    std::vector<double> p_eax(n, 0.0);
    std::vector<Solver> predicted(n, Solver::EAX);
    std::vector<double> thresholds(folds.n_folds, 0.0);
    const std::vector<double> zero_cost(n, 0.0);
    for (std::size_t f = 0; f < folds.n_folds; ++f) {
        const auto tune_rows = folds.test_rows(holdout_fold(f, folds.n_folds));
        const auto test_rows = folds.test_rows(f);
        auto probs_for = [&](const std::vector<std::size_t>& rows) {
            if (hook) {
                std::vector<double> out;
                for (auto r : rows) out.push_back(hook(r));
                return out;
            }
            std::vector<const ImageTensor*> imgs;
            for (auto r : rows) imgs.push_back(images[r]);
            return predict_p_eax(fold_params[f], imgs, 8, jobs);
        };
        const auto tune_p = probs_for(tune_rows);
        std::vector<InstancePerformance> perf;
        for (auto r : tune_rows) perf.push_back(table[r]);
        const std::vector<double> no_cost(tune_rows.size(), 0.0);
        const auto policy = tune_rows.empty() ? ThresholdPolicy{0.5, TunedOn::Fixed}
                                              : tune_threshold(tune_p, perf, no_cost, false, TunedOn::Holdout,
                                                               grid_step);
        thresholds[f] = policy.theta;
        const auto test_p = probs_for(test_rows);
        for (std::size_t k = 0; k < test_rows.size(); ++k) {
            p_eax[test_rows[k]] = test_p[k];
            predicted[test_rows[k]] = policy.apply(test_p[k]);
        }
    }
    return build_selector_report(std::move(name), table, zero_cost, false, folds.fold_of, p_eax, predicted,
                                 thresholds);
}

struct CnnCvResult {
    SelectorReport report;
    std::vector<Params<float>> fold_params;
    std::vector<std::vector<EpochMetrics>> histories;
};

/// Trains one network per fold (on training folds minus the holdout fold,
/// validating on the holdout fold) and evaluates them.
inline CnnCvResult run_cnn_cv(const std::vector<const ImageTensor*>& images, const PerformanceTable& table,
                              const FoldAssignment& folds, const NetworkSpec& spec, const TrainConfig& cfg,
                              double grid_step = 0.01, std::string name = "cnn") {
    if (folds.n_folds < 3) throw std::invalid_argument("run_cnn_cv: need at least 3 folds");
    CnnCvResult out;
    const auto labels = table.best_labels();
    for (std::size_t f = 0; f < folds.n_folds; ++f) {
        const std::size_t hold = holdout_fold(f, folds.n_folds);
        std::vector<LabeledImage> train_set, val_set;
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (folds.fold_of[i] == f) continue;
            (folds.fold_of[i] == hold ? val_set : train_set).push_back({images[i], labels[i]});
        }
        TrainConfig fc = cfg;
        fc.seed = derive_seed(cfg.seed, f);
        auto tr = train(train_set, val_set, spec, fc);
        out.fold_params.push_back(std::move(tr.params));
        out.histories.push_back(std::move(tr.history));
    }
    out.report = evaluate_cnn_selector(out.fold_params, images, table, folds, grid_step, cfg.jobs, {}, std::move(name));
    return out;
}

}  // namespace tspas::cnn
