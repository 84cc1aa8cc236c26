#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mobileie {

// Incompatible tensor/kernel dimensions.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid scalar argument (even kernel size, out-of-range epoch, ...).
struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Operation invoked on an object in the wrong state (uninitialized BN
// statistics, missing forward cache, fusing an already fused model).
struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric breakdown (non-positive variance, NaN loss).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// File/format failure; carries the byte offset where parsing stopped.
struct IoError : std::runtime_error {
    std::size_t offset;
    IoError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (byte offset " + std::to_string(off) + ")"), offset(off) {}
    explicit IoError(const std::string& msg) : std::runtime_error(msg), offset(0) {}
};

}  // namespace mobileie
