#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace planemvs {

enum class ErrorKind {
    Io,              // missing or unreadable file
    Format,          // malformed file contents
    Unsupported,     // well-formed but outside what we handle (e.g. non-PINHOLE)
    InvalidArgument, // precondition violated by the caller
    Degenerate,      // geometric degeneracy (plane through camera centre, ...)
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace planemvs
