#pragma once

#include <stdexcept>
#include <string>

namespace kehsim {

/// Invalid or inconsistent parameters. `key()` names the offending config
/// path when the error originates from a config file, empty otherwise.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& message, std::string key = {})
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

    [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Bad arguments to an operation (empty grids, misordered thresholds).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative procedure did not reach its stopping criterion.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The simulation state became non-finite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kehsim
