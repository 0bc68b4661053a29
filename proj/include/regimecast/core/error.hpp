#pragma once

#include <stdexcept>
#include <string>

namespace regimecast {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
    io,          ///< missing file, unreadable or unwritable path
    data,        ///< malformed or invariant-violating input data
    config,      ///< invalid run configuration or parameter
    infeasible,  ///< training cannot proceed (e.g. single-class table)
};

/// Base exception for the library. Messages are prefixed with the owning
/// module ("core_data: duplicate timestamp ...").
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& module, const std::string& message)
        : std::runtime_error(module + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class IoError : public Error {
public:
    IoError(const std::string& module, const std::string& message)
        : Error(ErrorKind::io, module, message) {}
};

class DataError : public Error {
public:
    DataError(const std::string& module, const std::string& message)
        : Error(ErrorKind::data, module, message) {}
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& module, const std::string& message)
        : Error(ErrorKind::config, module, message) {}
};

class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& module, const std::string& message)
        : Error(ErrorKind::infeasible, module, message) {}
};

}  // namespace regimecast
