#pragma once

#include <stdexcept>
#include <string>

namespace sipvol {

/// Broad failure category. The CLI maps each one to an exit code.
enum class ErrorKind { Config, Data, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

// Specific conditions callers may want to catch individually.

struct NonstationaryHarError : ConfigError {
    using ConfigError::ConfigError;
};

struct PositivityFailure : NumericalError {
    using NumericalError::NumericalError;
};

struct EmptyWindowError : NumericalError {
    using NumericalError::NumericalError;
};

struct IllConditionedError : NumericalError {
    IllConditionedError(const std::string& what, double condition)
        : NumericalError(what), condition(condition) {}
    double condition;
};

struct DegenerateTestError : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace sipvol
