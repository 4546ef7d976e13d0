#pragma once

#include <stdexcept>
#include <string>

namespace fluxtrace {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or parameter value (CLI exit code 2).
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Malformed or inconsistent input data (CLI exit code 3).
struct DataError : Error {
    explicit DataError(const std::string& what) : Error(what) {}
};

/// A fit failed to converge within its iteration budget (CLI exit code 4).
struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& what) : Error(what) {}
};

/// Model evaluated outside its domain of validity (pole, clamp, divergence).
struct ModelError : Error {
    explicit ModelError(const std::string& what) : Error(what) {}
};

} // namespace fluxtrace
