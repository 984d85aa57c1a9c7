#pragma once

#include <stdexcept>
#include <string>

namespace mrf {

/// Precondition or contract violation in a numerical routine.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Malformed or truncated file content.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration (unknown key, bad type, failed constraint).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mrf
