// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>

#include "shadowdiff/field.hpp"

namespace shadowdiff {

enum class BitDepth { k8 = 8, k16 = 16 };

/// Writes a binary netpbm raster: P5 for 1 channel, P6 for 3 channels.
/// 16-bit samples are big-endian per the netpbm convention.
void save_image(const Image& img, const std::filesystem::path& path, BitDepth depth = BitDepth::k16);
void save_mask(const MaskField& m, const std::filesystem::path& path);

/// Loads a P5/P6 raster or an RPLN plane (by extension). Values outside
/// [0,1] are clamped and counted in `clamped` when given.
Image load_image(const std::filesystem::path& path, std::size_t* clamped = nullptr);
MaskField load_mask(const std::filesystem::path& path, std::size_t* clamped = nullptr);

/// RPLN: "RPLN", u32 height, u32 width, u32 channels (little-endian), then
/// float32 little-endian values row-major, channel-fastest.
void write_raw_plane(const Field& field, std::ostream& out);
Field read_raw_plane(std::istream& in);
void save_raw_plane(const Field& field, const std::filesystem::path& path);
Field load_raw_plane(const std::filesystem::path& path);

/// Reads a whole file into memory; throws FormatError when unreadable.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace shadowdiff
