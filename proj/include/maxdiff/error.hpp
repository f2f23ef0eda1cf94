#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maxdiff {

enum class ErrorKind {
    invalid_spec,
    invalid_input,
    insufficient_data,
    undefined_item,
    conflict,
    not_found,
    io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_spec: return "invalid-spec";
        case ErrorKind::invalid_input: return "invalid-input";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::undefined_item: return "undefined-item";
        case ErrorKind::conflict: return "conflict";
        case ErrorKind::not_found: return "not-found";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

// Every domain failure in the library is raised as an Error; kind() drives
// CLI exit codes and HTTP status mapping.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace maxdiff
