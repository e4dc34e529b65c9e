// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/color.hpp"

#include <algorithm>
#include <cmath>

#include "shadowdiff/error.hpp"

namespace shadowdiff {

namespace {

double srgb_to_linear(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    constexpr double delta3 = delta * delta * delta;
    return t > delta3 ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// Reference white is the row sum of the RGB->XYZ matrix so that neutral
// grays land exactly on a = b = 0.
constexpr double kM[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
constexpr double kWhiteX = kM[0][0] + kM[0][1] + kM[0][2];
constexpr double kWhiteY = kM[1][0] + kM[1][1] + kM[1][2];
constexpr double kWhiteZ = kM[2][0] + kM[2][1] + kM[2][2];

}  // namespace

std::array<double, 3> srgb_to_lab(double r, double g, double b) {
    const double rl = srgb_to_linear(r);
    const double gl = srgb_to_linear(g);
    const double bl = srgb_to_linear(b);
    const double x = kM[0][0] * rl + kM[0][1] * gl + kM[0][2] * bl;
    const double y = kM[1][0] * rl + kM[1][1] * gl + kM[1][2] * bl;
    const double z = kM[2][0] * rl + kM[2][1] * gl + kM[2][2] * bl;
    const double fx = lab_f(x / kWhiteX);
    const double fy = lab_f(y / kWhiteY);
    const double fz = lab_f(z / kWhiteZ);
    return {std::clamp(116.0 * fy - 16.0, 0.0, 100.0), 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabImage rgb_to_lab(const Image& img) {
    if (img.channels != 3) {
        throw InvalidArgument("rgb_to_lab requires a 3-channel image, got " + img.shape_string());
    }
    LabImage lab(img.height, img.width);
    const std::size_t n = img.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        const auto v = srgb_to_lab(img.data[3 * p], img.data[3 * p + 1], img.data[3 * p + 2]);
        lab.data[3 * p] = static_cast<float>(v[0]);
        lab.data[3 * p + 1] = static_cast<float>(v[1]);
        lab.data[3 * p + 2] = static_cast<float>(v[2]);
    }
    return lab;
}

}  // namespace shadowdiff
