// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace shadowdiff::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First and second moment estimates plus the step count used for bias correction.
struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    long step = 0;

    void reset(std::size_t n) {
        m.assign(n, 0.0f);
        v.assign(n, 0.0f);
        step = 0;
    }
};

inline void adam_update(const AdamConfig& cfg, AdamState& st, std::span<float> params, std::span<const float> grads) {
    ++st.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
    const float step_size = static_cast<float>(cfg.lr / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(cfg.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const float g = grads[i];
        st.m[i] = b1 * st.m[i] + (1.0f - b1) * g;
        st.v[i] = b2 * st.v[i] + (1.0f - b2) * g * g;
        params[i] -= step_size * st.m[i] / (std::sqrt(st.v[i] * inv_c2) + eps);
    }
}

/// Decay actually applied after `updates` previous updates: the configured
/// decay, warmed up as (1 + n) / (10 + n) so early averages are not pinned
/// to the initial weights.
inline double ema_effective_decay(double decay, long updates) {
    return std::min(decay, (1.0 + static_cast<double>(updates)) / (10.0 + static_cast<double>(updates)));
}

inline void ema_update(std::span<float> ema, std::span<const float> live, double decay, long updates) {
    const float d = static_cast<float>(ema_effective_decay(decay, updates));
    for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = d * ema[i] + (1.0f - d) * live[i];
}

}  // namespace shadowdiff::nn
