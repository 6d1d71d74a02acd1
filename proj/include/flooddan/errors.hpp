#pragma once

#include <stdexcept>
#include <string>

namespace flooddan {

// Error categories are machine-parsable: the CLI prints "<category>: <message>"
// and maps each category to a distinct nonzero exit code.
enum class ErrorCategory {
    schema,
    integrity,
    data,
    config,
    size,
    dimension,
    divergence,
    io,
    dependency,
    parse,
};

const char* to_string(ErrorCategory c);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(std::string(to_string(category)) + ": " + message),
          category_(category) {}

    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::schema: return "schema_error";
        case ErrorCategory::integrity: return "integrity_error";
        case ErrorCategory::data: return "data_error";
        case ErrorCategory::config: return "config_error";
        case ErrorCategory::size: return "size_error";
        case ErrorCategory::dimension: return "dimension_error";
        case ErrorCategory::divergence: return "divergence_error";
        case ErrorCategory::io: return "io_error";
        case ErrorCategory::dependency: return "dependency_error";
        case ErrorCategory::parse: return "parse_error";
    }
    return "error";
}

[[noreturn]] inline void fail(ErrorCategory c, const std::string& msg) {
    throw Error(c, msg);
}

}  // namespace flooddan
