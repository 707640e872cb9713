#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oasis {

enum class ErrorKind {
    Configuration,
    InvalidLabel,
    InsufficientData,
    Degenerate,
    Range,
    Validation,
    Io,
    Contract,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind is
/// machine-readable and is what the CLI reports on exit.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

} // namespace oasis
