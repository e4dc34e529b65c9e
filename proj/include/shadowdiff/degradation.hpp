// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "shadowdiff/field.hpp"

namespace shadowdiff {

/// Smallest representable degradation factor; keeps y/h and h*h bounded.
inline constexpr float kDegradationFloor = 1e-4f;

/// Offset in the ratio y / (x + eta) used for ground-truth degradation maps.
inline constexpr float kDefaultEta = 1e-4f;

/// Residual threshold on [0,1] intensities above which a pixel counts as shadow.
inline constexpr float kShadowResidualThreshold = 0.1f;

/// Spatially-variant shadow model: y = w*m*x + (1-m)*x. `w` has either the
/// image's channel count or a single channel broadcast across channels, and
/// every weight must lie strictly inside (0,1).
Image apply_shadow(const Image& x, const MaskField& m, const Field& w);

/// h = w*m + (1-m), so that apply_shadow(x, m, w) == h * x elementwise.
DegradationMap compose_h(const MaskField& m, const Field& w);

/// Elementwise h * x (h may be single-channel).
Image multiply(const DegradationMap& h, const Image& x);

/// h_gt = y / (x + eta), clamped into [kDegradationFloor, 1].
DegradationMap ground_truth_degradation(const Image& x, const Image& y, float eta = kDefaultEta);

/// 1 where the channel-mean of (x - y) exceeds the residual threshold.
MaskField ground_truth_mask(const Image& x, const Image& y, float threshold = kShadowResidualThreshold);

}  // namespace shadowdiff
