// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "shadowdiff/field.hpp"

namespace shadowdiff {

/// sRGB (display-referred, D65) to CIELAB for one pixel with components in [0,1].
std::array<double, 3> srgb_to_lab(double r, double g, double b);

/// Per-pixel CIELAB conversion. Requires a 3-channel image.
LabImage rgb_to_lab(const Image& img);

}  // namespace shadowdiff
