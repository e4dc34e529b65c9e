// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/degradation.hpp"

#include <algorithm>

#include "shadowdiff/error.hpp"

namespace shadowdiff {

namespace {

void check_weights(const Field& w, int channels, const Field& m) {
    require_same_extent(m, w, "weight field");
    if (w.channels != 1 && w.channels != channels) {
        throw InvalidArgument("weight field must have 1 or " + std::to_string(channels) + " channels, got " +
                              w.shape_string());
    }
    for (float v : w.data) {
        if (!(v > 0.0f && v < 1.0f)) {
            throw InvalidArgument("illumination weight outside (0,1): " + std::to_string(v));
        }
    }
    for (float v : m.data) {
        if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("mask value outside [0,1]: " + std::to_string(v));
    }
}

}  // namespace

Image apply_shadow(const Image& x, const MaskField& m, const Field& w) {
    require_same_extent(x, m, "apply_shadow");
    check_weights(w, x.channels, m);
    Image y(x.height, x.width, x.channels);
    const std::size_t n = x.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        const float mp = m.data[p];
        for (int c = 0; c < x.channels; ++c) {
            const float wp = w.data[p * w.channels + (w.channels == 1 ? 0 : c)];
            const float xv = x.data[p * x.channels + c];
            y.data[p * x.channels + c] = std::clamp(wp * mp * xv + (1.0f - mp) * xv, 0.0f, 1.0f);
        }
    }
    return y;
}

DegradationMap compose_h(const MaskField& m, const Field& w) {
    check_weights(w, w.channels, m);
    DegradationMap h(m.height, m.width, w.channels);
    const std::size_t n = m.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        const float mp = m.data[p];
        for (int c = 0; c < w.channels; ++c) {
            h.data[p * w.channels + c] = w.data[p * w.channels + c] * mp + (1.0f - mp);
        }
    }
    return h;
}

Image multiply(const DegradationMap& h, const Image& x) {
    require_same_extent(h, x, "multiply");
    if (h.channels != 1 && h.channels != x.channels) {
        throw InvalidArgument("degradation map channel mismatch: " + h.shape_string() + " vs " + x.shape_string());
    }
    Image y(x.height, x.width, x.channels);
    const std::size_t n = x.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        for (int c = 0; c < x.channels; ++c) {
            y.data[p * x.channels + c] = h.data[p * h.channels + (h.channels == 1 ? 0 : c)] * x.data[p * x.channels + c];
        }
    }
    return y;
}

DegradationMap ground_truth_degradation(const Image& x, const Image& y, float eta) {
    require_same_shape(x, y, "ground_truth_degradation");
    if (!(eta > 0.0f)) throw InvalidArgument("eta must be positive");
    DegradationMap h(x.height, x.width, x.channels);
    for (std::size_t i = 0; i < x.size(); ++i) {
        h.data[i] = std::clamp(y.data[i] / (x.data[i] + eta), kDegradationFloor, 1.0f);
    }
    return h;
}

MaskField ground_truth_mask(const Image& x, const Image& y, float threshold) {
    require_same_shape(x, y, "ground_truth_mask");
    MaskField m(x.height, x.width);
    const std::size_t n = x.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        float diff = 0.0f;
        for (int c = 0; c < x.channels; ++c) diff += x.data[p * x.channels + c] - y.data[p * x.channels + c];
        m.data[p] = diff / static_cast<float>(x.channels) > threshold ? 1.0f : 0.0f;
    }
    return m;
}

}  // namespace shadowdiff
