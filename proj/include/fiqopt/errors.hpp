#pragma once

#include <stdexcept>
#include <string>

namespace fiqopt {

// Input data or configuration violates a contract. Mapped to exit code 1 by the CLI.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failure while reading or writing. Mapped to exit code 2 by the CLI.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fiqopt
