#pragma once

#include <stdexcept>
#include <string>

namespace normscape {

// Error categories map 1:1 onto the CLI exit codes: ConfigError -> 1,
// DataError -> 2, NumericError -> 3. Shape/contract violations inside the
// kernels throw std::invalid_argument and are treated like ConfigError.

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace normscape
