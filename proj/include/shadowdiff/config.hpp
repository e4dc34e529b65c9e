// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace shadowdiff {

/// Flat key=value configuration. Lines starting with '#' are comments.
/// Iteration order is sorted by key, which keeps echoes byte-stable.
class KeyValues {
public:
    static KeyValues parse(const std::string& text, const std::string& origin = "config");
    static KeyValues load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    bool contains(const std::string& key) const { return entries_.count(key) != 0; }
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Overlays `other` on top of this set.
    void merge(const KeyValues& other);

    std::string to_string() const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

/// Shortest decimal text that round-trips a double.
std::string format_double(double v);

/// SplitMix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace shadowdiff
