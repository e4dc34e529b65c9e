// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shadowdiff/config.hpp"
#include "shadowdiff/nn/layers.hpp"

namespace shadowdiff {

// Checkpoint file:
//   "SDCKPT1\n"
//   key=value header lines (architecture echo, step counter, training config)
//   "end\n"
//   for each named parameter set listed in the header key "sets", one RPLN
//   plane per registry tensor (rows x cols x 1), in registry order.

struct Checkpoint {
    KeyValues header;
    std::map<std::string, std::vector<float>> sets;
};

void save_checkpoint(const std::filesystem::path& path, const KeyValues& header, const nn::ParamRegistry& reg,
                     const std::vector<std::pair<std::string, std::span<const float>>>& sets);

/// Reads a checkpoint and validates each plane against `reg`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const nn::ParamRegistry& reg);

/// Header only; used to rebuild the architecture before the full load.
KeyValues read_checkpoint_header(const std::filesystem::path& path);

}  // namespace shadowdiff
