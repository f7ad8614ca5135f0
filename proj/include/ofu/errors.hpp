#pragma once

#include <stdexcept>
#include <string>

namespace ofu {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A precondition on a scalar parameter was violated (e.g. kappa < 1).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration file problem; the message starts with the offending key path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key_path, const std::string& what)
        : std::runtime_error(key_path.empty() ? what : key_path + ": " + what), key_path_(key_path) {}

    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

/// A solve or factorization broke down during a run.
class NumericalError : public std::runtime_error {
public:
    NumericalError(long step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

    long step() const noexcept { return step_; }

private:
    long step_;
};

inline void require_dims(bool ok, const char* what) {
    if (!ok) throw DimensionError(what);
}

}  // namespace ofu
