// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lens {

/// Bad input data: unreadable files, schema mismatches, unseen categories.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated an argument contract (shapes, ranges, config values).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN or infinity.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, std::size_t epoch)
        : NumericError(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

}  // namespace lens
