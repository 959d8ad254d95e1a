#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace csf {

// Error taxonomy mirrors the CLI exit codes: config -> 1, numeric -> 2, io -> 3.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename S>
inline void require_finite(S v, const char* where) {
    if (!std::isfinite(static_cast<double>(v))) {
        throw NumericError(std::string("non-finite value in ") + where);
    }
}

}  // namespace csf
