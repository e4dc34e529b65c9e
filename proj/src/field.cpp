// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/field.hpp"

#include <algorithm>
#include <cmath>

#include "shadowdiff/error.hpp"

namespace shadowdiff {

Field::Field(int h, int w, int c, float fill) : height(h), width(w), channels(c) {
    if (h < 0 || w < 0 || c < 0) {
        throw InvalidArgument("negative field dimension");
    }
    data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

std::string Field::shape_string() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Image::Image(int h, int w, int c, float fill) : Field(h, w, c, fill) {
    if (c != 1 && c != 3) {
        throw InvalidArgument("image channel count must be 1 or 3, got " + std::to_string(c));
    }
}

Image::Image(Field f) : Field(std::move(f)) {
    if (channels != 1 && channels != 3) {
        throw InvalidArgument("image channel count must be 1 or 3, got " + std::to_string(channels));
    }
}

MaskField::MaskField(int h, int w, float fill) : Field(h, w, 1, fill) {}

MaskField::MaskField(Field f) : Field(std::move(f)) {
    if (channels != 1) {
        throw InvalidArgument("mask must be single-channel, got " + shape_string());
    }
}

bool MaskField::is_binary() const {
    return std::all_of(data.begin(), data.end(), [](float v) { return v == 0.0f || v == 1.0f; });
}

DegradationMap::DegradationMap(int h, int w, int c, float fill) : Field(h, w, c, fill) {}

DegradationMap::DegradationMap(Field f) : Field(std::move(f)) {}

LabImage::LabImage(int h, int w) : Field(h, w, 3) {}

void require_same_shape(const Field& a, const Field& b, const char* what) {
    if (!a.same_shape(b)) {
        throw InvalidArgument(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
}

void require_same_extent(const Field& a, const Field& b, const char* what) {
    if (!a.same_extent(b)) {
        throw InvalidArgument(std::string(what) + ": spatial mismatch " + a.shape_string() + " vs " +
                              b.shape_string());
    }
}

std::size_t clamp_in_place(Field& f, float lo, float hi) {
    std::size_t moved = 0;
    for (float& v : f.data) {
        if (!(v >= lo)) {
            v = lo;
            ++moved;
        } else if (v > hi) {
            v = hi;
            ++moved;
        }
    }
    return moved;
}

bool all_finite(const Field& f) {
    return std::all_of(f.data.begin(), f.data.end(), [](float v) { return std::isfinite(v); });
}

Field to_state(const Image& img) {
    Field out(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = 2.0f * img.data[i] - 1.0f;
    return out;
}

Field mask_to_state(const MaskField& m) {
    Field out(m.height, m.width, 1);
    for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = 2.0f * m.data[i] - 1.0f;
    return out;
}

Image from_state(const Field& state) {
    Image out(state.height, state.width, state.channels);
    for (std::size_t i = 0; i < state.size(); ++i) {
        out.data[i] = std::clamp(0.5f * (state.data[i] + 1.0f), 0.0f, 1.0f);
    }
    return out;
}

Field channel_mean(const Field& f) {
    Field out(f.height, f.width, 1);
    const std::size_t n = f.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        float acc = 0.0f;
        for (int c = 0; c < f.channels; ++c) acc += f.data[p * f.channels + c];
        out.data[p] = acc / static_cast<float>(f.channels);
    }
    return out;
}

}  // namespace shadowdiff
