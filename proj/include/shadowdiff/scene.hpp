// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shadowdiff/config.hpp"
#include "shadowdiff/field.hpp"

namespace shadowdiff {

enum class ShapeFamily { kEllipse, kPolygon, kMixed };

struct SceneConfig {
    int height = 32;
    int width = 32;
    int channels = 3;
    int regions = 2;
    ShapeFamily shape = ShapeFamily::kMixed;
    /// Cell size in pixels of the coarse grid the illumination weight is
    /// interpolated from; larger is smoother.
    double smoothness = 12.0;
    double w_min = 0.3;
    double w_max = 0.6;
    /// Lower bound on shadow-free intensities; together with w_max it sets
    /// the detectability margin of the shadow residual.
    double x_min = 0.4;
    double x_max = 0.95;
    double texture = 0.05;
    double severity = 0.5;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument on an unusable configuration.
    void validate() const;

    KeyValues to_key_values() const;
    /// Reads the keys it knows from `kv`, leaving other fields at their defaults.
    static SceneConfig from_key_values(const KeyValues& kv);
};

/// One synthetic training triplet plus the hidden construction fields.
struct SceneSample {
    Image x;           // shadow-free
    Image y;           // shadow
    MaskField m;       // binary construction mask
    MaskField m_tilde; // corrupted initial mask
    DegradationMap h;
    Field w;
};

/// Minimum channel-mean residual x*(1-w) the generator guarantees inside
/// shadows, above the ground-truth mask threshold.
inline constexpr double kDetectabilitySlack = 0.02;

SceneSample generate_scene(const SceneConfig& cfg);

/// Seeded, severity-scaled corruption of a binary mask: dilate by k1, erode
/// by k2 (k1, k2 uniform in [0, round(3*severity)]), flip each pixel of the
/// boundary band with probability severity/2, then delete 4-connected
/// components smaller than severity * 2% of the image area. Severity 0 is
/// the identity.
MaskField corrupt_mask(const MaskField& m, double severity, std::uint64_t seed);

/// Morphology helpers on binary masks (square structuring element of radius r).
MaskField dilate(const MaskField& m, int radius);
MaskField erode(const MaskField& m, int radius);

// Dataset directory layout:
//   <root>/manifest                     generating config + one "scene=" line per scene
//   <root>/scene_%05d/{x,y}.ppm|pgm     16-bit rasters
//   <root>/scene_%05d/{m,m_tilde}.pgm   8-bit binary masks
//   <root>/scene_%05d/{h,w}.rpln        raw float planes
//   <root>/scene_%05d/meta              seed and config echo

std::string scene_dir_name(int index);
std::string image_extension(int channels);

/// Per-scene seed derived from the dataset seed.
std::uint64_t scene_seed(std::uint64_t dataset_seed, int index);

void write_scene(const SceneSample& s, const std::filesystem::path& dir, const KeyValues& meta);
SceneSample read_scene(const std::filesystem::path& dir);

/// Generates `count` scenes under `root` and writes the manifest. Returns the manifest path.
std::filesystem::path write_dataset(const SceneConfig& base, int count, const std::filesystem::path& root);

struct Dataset {
    KeyValues manifest;
    std::vector<std::string> names;
    std::vector<SceneSample> scenes;
};

Dataset read_dataset(const std::filesystem::path& root);

/// In-memory equivalent of write_dataset.
std::vector<SceneSample> generate_scenes(const SceneConfig& base, int count, int first_index = 0);

}  // namespace shadowdiff
