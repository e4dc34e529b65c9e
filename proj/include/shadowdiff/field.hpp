// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace shadowdiff {

/// Dense H x W x C grid of 32-bit values, row-major with the channel index
/// fastest. Carries diffusion states and anything else without a range
/// contract.
struct Field {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Field() = default;
    Field(int h, int w, int c, float fill = 0.0f);

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    float& at(int y, int x, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    float at(int y, int x, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

    std::span<float> values() { return data; }
    std::span<const float> values() const { return data; }

    bool same_shape(const Field& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }
    bool same_extent(const Field& other) const { return height == other.height && width == other.width; }

    std::string shape_string() const;
};

/// Intensities in [0,1]; channels is 1 or 3.
struct Image : Field {
    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f);
    explicit Image(Field f);
};

/// Single-channel field in [0,1]. Binary masks hold only 0 and 1.
struct MaskField : Field {
    MaskField() = default;
    MaskField(int h, int w, float fill = 0.0f);
    explicit MaskField(Field f);

    bool is_binary() const;
};

/// Multiplicative illumination factor per pixel and channel, in (0,1].
struct DegradationMap : Field {
    DegradationMap() = default;
    DegradationMap(int h, int w, int c, float fill = 1.0f);
    explicit DegradationMap(Field f);
};

/// CIELAB triples per pixel, stored as a 3-channel field (L, a, b).
struct LabImage : Field {
    LabImage() = default;
    LabImage(int h, int w);
};

void require_same_shape(const Field& a, const Field& b, const char* what);
void require_same_extent(const Field& a, const Field& b, const char* what);

/// Clamps every value into [lo, hi]; returns how many values moved.
std::size_t clamp_in_place(Field& f, float lo = 0.0f, float hi = 1.0f);

bool all_finite(const Field& f);

/// Diffusion states live in [-1,1]; images in [0,1].
Field to_state(const Image& img);
Field mask_to_state(const MaskField& m);
Image from_state(const Field& state);

/// Per-pixel channel mean as a single-channel field.
Field channel_mean(const Field& f);

}  // namespace shadowdiff
