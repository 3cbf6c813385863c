#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace distopt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed arguments that violate a documented precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

class NonPositivePressure : public InvalidInput {
public:
    explicit NonPositivePressure(double pressure);
    double pressure;
};

class LengthMismatch : public InvalidInput {
public:
    LengthMismatch(std::size_t expected, std::size_t actual);
};

/// Property correlation asked to evaluate outside its declared range.
class TemperatureOutOfRange : public Error {
public:
    TemperatureOutOfRange(std::string component, double temperature);
    std::string component;
    double temperature;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double residual, int iterations);
    double residual;
    int iterations;
};

/// Malformed or inconsistent configuration/data file.
class SchemaError : public Error {
public:
    using Error::Error;
};

class CompositionOutOfTolerance : public SchemaError {
public:
    CompositionOutOfTolerance(const std::string& scenario, double sum);
    double sum;
};

class InfeasibleSolution : public Error {
public:
    using Error::Error;
};

class InitializationFailed : public Error {
public:
    InitializationFailed(int column, const std::string& reason);
    int column;  // 1-based
};

class PoolTooSmall : public Error {
public:
    PoolTooSmall(std::size_t pool, std::size_t mu);
};

/// Checkpoint written by a run with a different configuration or seed.
class ResumeMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace distopt
