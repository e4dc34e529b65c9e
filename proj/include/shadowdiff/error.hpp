// Copyright (C) 2026 The shadowdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace shadowdiff {

/// Precondition violation on an argument (shape mismatch, out-of-range parameter).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated file contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN or Inf surfaced during training or sampling.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, long iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

/// Invalid configuration key or value; the message names the key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace shadowdiff
