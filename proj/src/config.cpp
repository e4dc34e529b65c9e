// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "shadowdiff/config.hpp"

#include <charconv>
#include <sstream>

#include "shadowdiff/error.hpp"
#include "shadowdiff/io.hpp"

namespace shadowdiff {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        kv.entries_[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    return parse(text, path.string());
}

std::optional<std::string> KeyValues::find(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValues::get_string(const std::string& key) const {
    auto v = find(key);
    if (!v) throw ConfigError("missing config key '" + key + "'");
    return *v;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

long long KeyValues::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + s + "'");
    }
    return v;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
    return contains(key) ? get_int(key) : fallback;
}

double KeyValues::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
    }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
    return contains(key) ? get_double(key) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
    if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

void KeyValues::merge(const KeyValues& other) {
    for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

std::string KeyValues::to_string() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace shadowdiff
