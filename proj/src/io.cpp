// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "shadowdiff/error.hpp"

namespace shadowdiff {

namespace {

constexpr char kPlaneMagic[4] = {'R', 'P', 'L', 'N'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 28;

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    v = to_le(v);
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) {
        throw FormatError("raw plane: truncated header");
    }
    return to_le(v);
}

void check_dims(std::uint64_t h, std::uint64_t w, std::uint64_t c, const char* what) {
    if (h == 0 || w == 0 || c == 0) {
        throw FormatError(std::string(what) + ": zero dimension");
    }
    if (h > kMaxElements || w > kMaxElements || h * w > kMaxElements || h * w * c > kMaxElements) {
        throw FormatError(std::string(what) + ": dimension overflow");
    }
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw FormatError("pnm: truncated header");
    return tok;
}

std::uint64_t pnm_number(std::istream& in) {
    const std::string tok = pnm_token(in);
    if (tok.size() > 12 || tok.find_first_not_of("0123456789") != std::string::npos) {
        throw FormatError("pnm: bad header field '" + tok + "'");
    }
    return std::stoull(tok);
}

bool has_extension(const std::filesystem::path& p, const char* ext) { return p.extension() == ext; }

Field load_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    const std::string magic = pnm_token(in);
    int channels = 0;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw FormatError("pnm: unsupported magic '" + magic + "' in " + path.string());
    }
    const std::uint64_t w = pnm_number(in);
    const std::uint64_t h = pnm_number(in);
    const std::uint64_t maxval = pnm_number(in);
    check_dims(h, w, channels, "pnm");
    if (maxval != 255 && maxval != 65535) {
        throw FormatError("pnm: unsupported maxval " + std::to_string(maxval));
    }
    const std::size_t count = h * w * channels;
    const std::size_t bytes_per = maxval == 255 ? 1 : 2;
    std::string payload(count * bytes_per, '\0');
    if (!in.read(payload.data(), static_cast<std::streamsize>(payload.size()))) {
        throw FormatError("pnm: truncated payload in " + path.string());
    }
    Field f(static_cast<int>(h), static_cast<int>(w), channels);
    const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
    const float scale = 1.0f / static_cast<float>(maxval);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned v = bytes_per == 1 ? bytes[i] : (unsigned{bytes[2 * i]} << 8) | bytes[2 * i + 1];
        f.data[i] = static_cast<float>(v) * scale;
    }
    return f;
}

void save_pnm(const Field& f, const std::filesystem::path& path, BitDepth depth) {
    if (f.channels != 1 && f.channels != 3) {
        throw InvalidArgument("pnm: unsupported channel count " + std::to_string(f.channels));
    }
    const unsigned maxval = depth == BitDepth::k8 ? 255u : 65535u;
    std::string out = (f.channels == 1 ? "P5\n" : "P6\n") + std::to_string(f.width) + " " +
                      std::to_string(f.height) + "\n" + std::to_string(maxval) + "\n";
    out.reserve(out.size() + f.size() * (depth == BitDepth::k8 ? 1 : 2));
    for (float v : f.data) {
        const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
        const auto q = static_cast<unsigned>(std::lround(c * static_cast<float>(maxval)));
        if (depth == BitDepth::k8) {
            out.push_back(static_cast<char>(q));
        } else {
            out.push_back(static_cast<char>(q >> 8));
            out.push_back(static_cast<char>(q & 0xffu));
        }
    }
    write_file(path, out);
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

void save_image(const Image& img, const std::filesystem::path& path, BitDepth depth) {
    save_pnm(img, path, depth);
}

void save_mask(const MaskField& m, const std::filesystem::path& path) { save_pnm(m, path, BitDepth::k8); }

Image load_image(const std::filesystem::path& path, std::size_t* clamped) {
    Field f = has_extension(path, ".rpln") ? load_raw_plane(path) : load_pnm(path);
    if (f.channels != 1 && f.channels != 3) {
        throw FormatError("unsupported channel count " + std::to_string(f.channels) + " in " + path.string());
    }
    for (float& v : f.data) {
        if (!std::isfinite(v)) v = 0.0f;
    }
    const std::size_t moved = clamp_in_place(f);
    if (clamped) *clamped = moved;
    return Image(std::move(f));
}

MaskField load_mask(const std::filesystem::path& path, std::size_t* clamped) {
    Field f = has_extension(path, ".rpln") ? load_raw_plane(path) : load_pnm(path);
    if (f.channels != 1) {
        throw FormatError("mask must be single-channel in " + path.string());
    }
    const std::size_t moved = clamp_in_place(f);
    if (clamped) *clamped = moved;
    return MaskField(std::move(f));
}

void write_raw_plane(const Field& field, std::ostream& out) {
    out.write(kPlaneMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(field.height));
    put_u32(out, static_cast<std::uint32_t>(field.width));
    put_u32(out, static_cast<std::uint32_t>(field.channels));
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(field.data.data()),
                  static_cast<std::streamsize>(field.data.size() * sizeof(float)));
    } else {
        for (float v : field.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
}

Field read_raw_plane(std::istream& in) {
    char magic[4] = {};
    if (!in.read(magic, 4)) throw FormatError("raw plane: truncated header");
    if (std::memcmp(magic, kPlaneMagic, 4) != 0) throw FormatError("raw plane: bad magic");
    const std::uint32_t h = get_u32(in);
    const std::uint32_t w = get_u32(in);
    const std::uint32_t c = get_u32(in);
    check_dims(h, w, c, "raw plane");
    Field f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    if (!in.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * 4))) {
        throw FormatError("raw plane: truncated payload");
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : f.data) v = std::bit_cast<float>(to_le(std::bit_cast<std::uint32_t>(v)));
    }
    return f;
}

void save_raw_plane(const Field& field, const std::filesystem::path& path) {
    std::ostringstream ss;
    write_raw_plane(field, ss);
    write_file(path, ss.str());
}

Field load_raw_plane(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return read_raw_plane(in);
}

}  // namespace shadowdiff
