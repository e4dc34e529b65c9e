// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Building blocks with hand-written reverse passes. Activations are CHW
// tensors for a single sample; parameters live in one flat vector per model
// and layers refer to them by offset, so optimizers, EMA and checkpoints
// work on plain spans.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shadowdiff/error.hpp"

namespace shadowdiff::nn {

template <typename T>
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int channels, int height, int width) : c(channels), h(height), w(width), v(std::size_t(channels) * height * width) {}

    void resize(int channels, int height, int width) {
        c = channels;
        h = height;
        w = width;
        v.assign(std::size_t(channels) * height * width, T(0));
    }
    std::size_t plane() const { return std::size_t(h) * w; }
    std::size_t size() const { return v.size(); }
    T* channel(int ci) { return v.data() + ci * plane(); }
    const T* channel(int ci) const { return v.data() + ci * plane(); }
};

struct ParamInfo {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;
    int fan_in;  // 0 for biases
};

/// Records the layout of a flat parameter vector.
class ParamRegistry {
public:
    std::size_t add(const std::string& name, int rows, int cols, int fan_in) {
        const std::size_t off = total_;
        infos_.push_back({name, off, rows, cols, fan_in});
        total_ += std::size_t(rows) * cols;
        return off;
    }
    std::size_t total() const { return total_; }
    const std::vector<ParamInfo>& infos() const { return infos_; }

    /// Kaiming-normal weights (std = sqrt(2 / fan_in)), zero biases.
    template <typename T>
    void kaiming_init(std::span<T> params, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        for (const auto& p : infos_) {
            T* dst = params.data() + p.offset;
            const std::size_t n = std::size_t(p.rows) * p.cols;
            if (p.fan_in == 0) {
                std::fill(dst, dst + n, T(0));
                continue;
            }
            std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / p.fan_in));
            for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<T>(dist(rng));
        }
    }

private:
    std::vector<ParamInfo> infos_;
    std::size_t total_ = 0;
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// k x k convolution, stride 1, zero "same" padding, optional dilation.
/// Weight layout: out x (in * k * k), row-major over (in, ky, kx).
struct Conv2d {
    int in = 0;
    int out = 0;
    int k = 3;
    int dilation = 1;
    std::size_t w_off = 0;
    std::size_t b_off = 0;

    Conv2d() = default;
    Conv2d(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch, int kernel, int dil = 1)
        : in(in_ch), out(out_ch), k(kernel), dilation(dil) {
        if (in < 1 || out < 1 || k < 1 || k % 2 == 0 || dilation < 1) {
            throw InvalidArgument("conv " + name + ": invalid dimensions");
        }
        w_off = reg.add(name + ".weight", out, in * k * k, in * k * k);
        b_off = reg.add(name + ".bias", 1, out, 0);
    }

    int patch() const { return in * k * k; }

    template <typename T>
    void im2col(const Tensor<T>& x, std::vector<T>& col) const {
        const int H = x.h, W = x.w, r = k / 2;
        const std::size_t HW = x.plane();
        col.assign(std::size_t(patch()) * HW, T(0));
        for (int ci = 0; ci < in; ++ci) {
            const T* src = x.channel(ci);
            for (int ky = 0; ky < k; ++ky) {
                const int oy = (ky - r) * dilation;
                for (int kx = 0; kx < k; ++kx) {
                    const int ox = (kx - r) * dilation;
                    T* row = col.data() + (std::size_t((ci * k + ky) * k + kx)) * HW;
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + oy;
                        if (sy < 0 || sy >= H) continue;
                        const int x0 = std::max(0, -ox), x1 = std::min(W, W - ox);
                        for (int xx = x0; xx < x1; ++xx) row[y * W + xx] = src[sy * W + xx + ox];
                    }
                }
            }
        }
    }

    template <typename T>
    void col2im(const std::vector<T>& col, Tensor<T>& dx) const {
        const int H = dx.h, W = dx.w, r = k / 2;
        const std::size_t HW = dx.plane();
        for (int ci = 0; ci < in; ++ci) {
            T* dst = dx.channel(ci);
            for (int ky = 0; ky < k; ++ky) {
                const int oy = (ky - r) * dilation;
                for (int kx = 0; kx < k; ++kx) {
                    const int ox = (kx - r) * dilation;
                    const T* row = col.data() + (std::size_t((ci * k + ky) * k + kx)) * HW;
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + oy;
                        if (sy < 0 || sy >= H) continue;
                        const int x0 = std::max(0, -ox), x1 = std::min(W, W - ox);
                        for (int xx = x0; xx < x1; ++xx) dst[sy * W + xx + ox] += row[y * W + xx];
                    }
                }
            }
        }
    }

    /// y = conv(x). `col` receives the unfolded input for the reverse pass.
    template <typename T>
    void forward(std::span<const T> params, const Tensor<T>& x, Tensor<T>& y, std::vector<T>& col) const {
        if (x.c != in) throw InvalidArgument("conv: expected " + std::to_string(in) + " input channels");
        const std::size_t HW = x.plane();
        y.resize(out, x.h, x.w);
        const T* src = x.v.data();
        if (k == 1) {
            col.clear();
        } else {
            im2col(x, col);
            src = col.data();
        }
        Eigen::Map<const RowMat<T>> Wm(params.data() + w_off, out, patch());
        Eigen::Map<const RowMat<T>> X(src, patch(), HW);
        Eigen::Map<RowMat<T>> Y(y.v.data(), out, HW);
        Y.noalias() = Wm * X;
        const T* b = params.data() + b_off;
        for (int o = 0; o < out; ++o) Y.row(o).array() += b[o];
    }

    /// Accumulates parameter gradients into `grads` and, when `dx` is
    /// non-null, writes the input gradient (overwriting it).
    template <typename T>
    void backward(std::span<const T> params, const Tensor<T>& x, const std::vector<T>& col, const Tensor<T>& dy,
                  std::span<T> grads, Tensor<T>* dx) const {
        const std::size_t HW = dy.plane();
        const T* src = k == 1 ? x.v.data() : col.data();
        Eigen::Map<const RowMat<T>> X(src, patch(), HW);
        Eigen::Map<const RowMat<T>> dY(dy.v.data(), out, HW);
        Eigen::Map<RowMat<T>> dW(grads.data() + w_off, out, patch());
        dW.noalias() += dY * X.transpose();
        T* db = grads.data() + b_off;
        // Plain loop: Eigen's vectorized sum peels by pointer alignment,
        // which would make the result depend on the allocation address.
        for (int o = 0; o < out; ++o) {
            const T* row = dy.v.data() + o * HW;
            T acc = 0;
            for (std::size_t i = 0; i < HW; ++i) acc += row[i];
            db[o] += acc;
        }
        if (!dx) return;
        Eigen::Map<const RowMat<T>> Wm(params.data() + w_off, out, patch());
        dx->resize(in, dy.h, dy.w);
        if (k == 1) {
            Eigen::Map<RowMat<T>> dX(dx->v.data(), in, HW);
            dX.noalias() = Wm.transpose() * dY;
            return;
        }
        std::vector<T> dcol(std::size_t(patch()) * HW);
        Eigen::Map<RowMat<T>> dC(dcol.data(), patch(), HW);
        dC.noalias() = Wm.transpose() * dY;
        col2im(dcol, *dx);
    }
};

/// Dense layer on a vector: y = W x + b, W is out x in.
struct Linear {
    int in = 0;
    int out = 0;
    std::size_t w_off = 0;
    std::size_t b_off = 0;

    Linear() = default;
    Linear(ParamRegistry& reg, const std::string& name, int in_f, int out_f) : in(in_f), out(out_f) {
        w_off = reg.add(name + ".weight", out, in, in);
        b_off = reg.add(name + ".bias", 1, out, 0);
    }

    template <typename T>
    void forward(std::span<const T> params, const std::vector<T>& x, std::vector<T>& y) const {
        y.assign(out, T(0));
        const T* Wp = params.data() + w_off;
        const T* b = params.data() + b_off;
        for (int o = 0; o < out; ++o) {
            T acc = b[o];
            for (int i = 0; i < in; ++i) acc += Wp[o * in + i] * x[i];
            y[o] = acc;
        }
    }

    template <typename T>
    void backward(std::span<const T> params, const std::vector<T>& x, const std::vector<T>& dy, std::span<T> grads,
                  std::vector<T>* dx) const {
        T* dW = grads.data() + w_off;
        T* db = grads.data() + b_off;
        for (int o = 0; o < out; ++o) {
            db[o] += dy[o];
            for (int i = 0; i < in; ++i) dW[o * in + i] += dy[o] * x[i];
        }
        if (!dx) return;
        dx->assign(in, T(0));
        const T* Wp = params.data() + w_off;
        for (int o = 0; o < out; ++o) {
            for (int i = 0; i < in; ++i) (*dx)[i] += Wp[o * in + i] * dy[o];
        }
    }
};

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void silu_forward(const std::vector<T>& x, std::vector<T>& y) {
    y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
}

/// dx = dy * silu'(x), in place on dy.
template <typename T>
void silu_backward(const std::vector<T>& x, std::vector<T>& dy) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T s = sigmoid(x[i]);
        dy[i] *= s * (T(1) + x[i] * (T(1) - s));
    }
}

template <typename T>
void avgpool2_forward(const Tensor<T>& x, Tensor<T>& y) {
    if (x.h % 2 || x.w % 2) throw InvalidArgument("avgpool2 needs even spatial dimensions");
    y.resize(x.c, x.h / 2, x.w / 2);
    for (int c = 0; c < x.c; ++c) {
        const T* s = x.channel(c);
        T* d = y.channel(c);
        for (int yy = 0; yy < y.h; ++yy) {
            for (int xx = 0; xx < y.w; ++xx) {
                const int i = 2 * yy * x.w + 2 * xx;
                d[yy * y.w + xx] = T(0.25) * (s[i] + s[i + 1] + s[i + x.w] + s[i + x.w + 1]);
            }
        }
    }
}

template <typename T>
void avgpool2_backward(const Tensor<T>& dy, Tensor<T>& dx) {
    dx.resize(dy.c, dy.h * 2, dy.w * 2);
    for (int c = 0; c < dy.c; ++c) {
        const T* s = dy.channel(c);
        T* d = dx.channel(c);
        for (int yy = 0; yy < dy.h; ++yy) {
            for (int xx = 0; xx < dy.w; ++xx) {
                const T g = T(0.25) * s[yy * dy.w + xx];
                const int i = 2 * yy * dx.w + 2 * xx;
                d[i] = d[i + 1] = d[i + dx.w] = d[i + dx.w + 1] = g;
            }
        }
    }
}

template <typename T>
void upsample2_forward(const Tensor<T>& x, Tensor<T>& y) {
    y.resize(x.c, x.h * 2, x.w * 2);
    for (int c = 0; c < x.c; ++c) {
        const T* s = x.channel(c);
        T* d = y.channel(c);
        for (int yy = 0; yy < y.h; ++yy) {
            for (int xx = 0; xx < y.w; ++xx) d[yy * y.w + xx] = s[(yy / 2) * x.w + xx / 2];
        }
    }
}

template <typename T>
void upsample2_backward(const Tensor<T>& dy, Tensor<T>& dx) {
    dx.resize(dy.c, dy.h / 2, dy.w / 2);
    for (int c = 0; c < dy.c; ++c) {
        const T* s = dy.channel(c);
        T* d = dx.channel(c);
        for (int yy = 0; yy < dy.h; ++yy) {
            for (int xx = 0; xx < dy.w; ++xx) d[(yy / 2) * dx.w + xx / 2] += s[yy * dy.w + xx];
        }
    }
}

/// Channel concatenation [a | b].
template <typename T>
void concat_forward(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y) {
    if (a.h != b.h || a.w != b.w) throw InvalidArgument("concat: spatial mismatch");
    y.resize(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), y.v.begin());
    std::copy(b.v.begin(), b.v.end(), y.v.begin() + a.v.size());
}

template <typename T>
void concat_backward(const Tensor<T>& dy, int a_channels, Tensor<T>& da, Tensor<T>& db) {
    da.resize(a_channels, dy.h, dy.w);
    db.resize(dy.c - a_channels, dy.h, dy.w);
    std::copy(dy.v.begin(), dy.v.begin() + da.v.size(), da.v.begin());
    std::copy(dy.v.begin() + da.v.size(), dy.v.end(), db.v.begin());
}

/// y[c, :, :] += bias[c]
template <typename T>
void add_channel_bias(Tensor<T>& y, const std::vector<T>& bias) {
    for (int c = 0; c < y.c; ++c) {
        T* d = y.channel(c);
        for (std::size_t i = 0; i < y.plane(); ++i) d[i] += bias[c];
    }
}

template <typename T>
void channel_bias_backward(const Tensor<T>& dy, std::vector<T>& dbias) {
    dbias.assign(dy.c, T(0));
    for (int c = 0; c < dy.c; ++c) {
        const T* d = dy.channel(c);
        T acc = 0;
        for (std::size_t i = 0; i < dy.plane(); ++i) acc += d[i];
        dbias[c] = acc;
    }
}

/// Sinusoidal embedding of a timestep: [sin(t f_i), cos(t f_i)], f_i = 10000^(-i/half).
template <typename T>
std::vector<T> timestep_embedding(int t, int dim) {
    std::vector<T> e(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double f = std::exp(-std::log(10000.0) * i / half);
        e[i] = static_cast<T>(std::sin(t * f));
        e[half + i] = static_cast<T>(std::cos(t * f));
    }
    return e;
}

}  // namespace shadowdiff::nn
