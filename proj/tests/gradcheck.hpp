// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "shadowdiff/denoiser.hpp"
#include "shadowdiff/estimator.hpp"
#include "shadowdiff/nn/unet.hpp"

namespace shadowdiff::testing {

struct GradCheck {
    double max_rel = 0.0;
    std::size_t checked = 0;
};

/// Central differences of `f` at `x` against `analytic`, one coordinate at a
/// time. Relative error is |a - n| / max(|a|, |n|, floor). The default step
/// keeps cancellation noise (~1e-16 * |f| / step) well below 1e-3 relative
/// for gradient components near the floor.
template <typename F>
GradCheck check_gradient(std::vector<double>& x, const std::vector<double>& analytic, F&& f, double step = 1e-5,
                         double floor = 1e-6) {
    GradCheck out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double fp = f();
        x[i] = saved - step;
        const double fm = f();
        x[i] = saved;
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), floor});
        out.max_rel = std::max(out.max_rel, std::abs(a - numeric) / denom);
        ++out.checked;
    }
    return out;
}

inline std::vector<double> gaussian_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// One random instance of the full denoiser loss in double precision.
struct UNetInstance {
    nn::UNet<double> net;
    std::vector<double> params;
    nn::Tensor<double> input;
    std::vector<double> eps;
    std::vector<double> m_gt;
    int t = 1;
    double lambda = 0.5;

    UNetInstance(const nn::UNetSpec& spec, int size, std::uint64_t seed, double lam)
        : net(spec), lambda(lam) {
        params.resize(net.param_count());
        net.registry().kaiming_init<double>(params, seed);
        // Kaiming init leaves biases at zero; perturb them so their
        // gradients are exercised away from a symmetric point.
        for (const auto& info : net.registry().infos()) {
            if (info.fan_in != 0) continue;
            const auto b = gaussian_vector(std::size_t(info.rows) * info.cols, seed + info.offset, 0.1);
            std::copy(b.begin(), b.end(), params.begin() + info.offset);
        }
        input.resize(spec.input_channels(), size, size);
        input.v = gaussian_vector(input.size(), seed + 1);
        eps = gaussian_vector(std::size_t(spec.channels) * size * size, seed + 2);
        std::mt19937_64 rng(seed + 3);
        m_gt.resize(std::size_t(size) * size);
        for (double& m : m_gt) m = (rng() & 1) ? 1.0 : 0.0;
        t = 1 + static_cast<int>(rng() % 1000);
    }

    double loss(std::span<const double> p) const {
        typename nn::UNet<double>::Cache c;
        c.input = input;
        net.forward(p, t, c);
        return loss_total<double>(c.noise.v, eps, c.mask.v, m_gt, lambda).total;
    }

    std::vector<double> gradient() const {
        typename nn::UNet<double>::Cache c;
        c.input = input;
        std::vector<double> g(params.size(), 0.0);
        accumulate_gradient<double>(net, params, c, t, eps, m_gt, lambda, g);
        return g;
    }

    GradCheck check() {
        const auto g = gradient();
        return check_gradient(params, g, [&] { return loss(params); });
    }
};

/// One random instance of the estimator's MSE loss in double precision.
struct EstimatorInstance {
    EstimatorNet<double> net;
    std::vector<double> params;
    nn::Tensor<double> input;
    std::vector<double> target;

    EstimatorInstance(const EstimatorSpec& spec, int size, std::uint64_t seed) : net(spec) {
        params.resize(net.param_count());
        net.registry().kaiming_init<double>(params, seed);
        for (const auto& info : net.registry().infos()) {
            if (info.fan_in != 0) continue;
            const auto b = gaussian_vector(std::size_t(info.rows) * info.cols, seed + info.offset, 0.1);
            std::copy(b.begin(), b.end(), params.begin() + info.offset);
        }
        input.resize(spec.channels + 1, size, size);
        input.v = gaussian_vector(input.size(), seed + 1, 0.5);
        std::mt19937_64 rng(seed + 2);
        std::uniform_real_distribution<double> u(0.1, 1.0);
        target.resize(std::size_t(spec.channels) * size * size);
        for (double& v : target) v = u(rng);
    }

    double loss(std::span<const double> p) const {
        typename EstimatorNet<double>::Cache c;
        c.input = input;
        net.forward(p, c);
        double s = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) s += (c.h.v[i] - target[i]) * (c.h.v[i] - target[i]);
        return s / static_cast<double>(target.size());
    }

    std::vector<double> gradient() const {
        typename EstimatorNet<double>::Cache c;
        c.input = input;
        net.forward(params, c);
        nn::Tensor<double> d(c.h.c, c.h.h, c.h.w);
        for (std::size_t i = 0; i < target.size(); ++i) d.v[i] = 2.0 * (c.h.v[i] - target[i]) / target.size();
        std::vector<double> g(params.size(), 0.0);
        net.backward(params, c, d, g);
        return g;
    }

    GradCheck check() {
        const auto g = gradient();
        return check_gradient(params, g, [&] { return loss(params); });
    }
};

}  // namespace shadowdiff::testing
