#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

// Error idiom: exceptions. Precondition violations throw std::invalid_argument,
// slot indices out of range throw std::out_of_range, and the two domain
// failures below carry enough context for a caller to report them.

namespace microdistort {

/// A keystream ran out before the trace it was applied to.
class KeyExhaustedError : public std::runtime_error {
public:
    KeyExhaustedError(std::size_t key_length, std::size_t required)
        : std::runtime_error("keystream exhausted: have " + std::to_string(key_length) +
                             " bits, need " + std::to_string(required)),
          key_length_(key_length), required_(required)
    {
    }

    std::size_t key_length() const noexcept { return key_length_; }
    std::size_t required() const noexcept { return required_; }

private:
    std::size_t key_length_;
    std::size_t required_;
};

/// CSV trace could not be loaded. `row()` is the 1-based line number in the
/// file (the header is line 1), or 0 when the failure is not tied to a row.
class TraceLoadError : public std::runtime_error {
public:
    TraceLoadError(const std::string& what, std::size_t row = 0)
        : std::runtime_error(row == 0 ? what : "line " + std::to_string(row) + ": " + what),
          row_(row)
    {
    }

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

} // namespace microdistort
