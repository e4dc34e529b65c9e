// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "shadowdiff/error.hpp"
#include "shadowdiff/io.hpp"

namespace shadowdiff {

namespace {

constexpr const char* kMagic = "SDCKPT1";

KeyValues read_header(std::istream& in, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw FormatError("not a checkpoint: " + path.string());
    std::string text;
    while (true) {
        if (!std::getline(in, line)) throw FormatError("checkpoint header truncated: " + path.string());
        if (line == "end") break;
        text += line + "\n";
    }
    return KeyValues::parse(text, path.string());
}

std::vector<std::string> split_sets(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const KeyValues& header, const nn::ParamRegistry& reg,
                     const std::vector<std::pair<std::string, std::span<const float>>>& sets) {
    KeyValues h = header;
    std::string names;
    for (const auto& [name, values] : sets) {
        if (values.size() != reg.total()) throw InvalidArgument("checkpoint set '" + name + "' has wrong size");
        names += (names.empty() ? "" : ",") + name;
    }
    h.set("sets", names);
    h.set("param_count", std::to_string(reg.total()));
    h.set("tensors", std::to_string(reg.infos().size()));
    std::ostringstream out;
    out << kMagic << "\n" << h.to_string() << "end\n";
    for (const auto& [name, values] : sets) {
        for (const auto& info : reg.infos()) {
            Field plane(info.rows, info.cols, 1);
            std::copy_n(values.data() + info.offset, plane.size(), plane.data.begin());
            write_raw_plane(plane, out);
        }
    }
    write_file(path, out.str());
}

KeyValues read_checkpoint_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    return read_header(in, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const nn::ParamRegistry& reg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    Checkpoint ck;
    ck.header = read_header(in, path);
    if (static_cast<std::size_t>(ck.header.get_int("param_count", -1)) != reg.total()) {
        throw FormatError("checkpoint parameter count does not match the architecture: " + path.string());
    }
    for (const auto& name : split_sets(ck.header.get_string("sets", ""))) {
        std::vector<float> values(reg.total());
        for (const auto& info : reg.infos()) {
            const Field plane = read_raw_plane(in);
            if (plane.height != info.rows || plane.width != info.cols || plane.channels != 1) {
                throw FormatError("checkpoint tensor " + info.name + " has shape " + plane.shape_string());
            }
            std::copy(plane.data.begin(), plane.data.end(), values.begin() + info.offset);
        }
        ck.sets.emplace(name, std::move(values));
    }
    return ck;
}

}  // namespace shadowdiff
