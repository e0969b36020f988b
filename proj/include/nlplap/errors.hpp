#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlplap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The requested kernel norm does not exist (the integral diverges).
class DivergentNorm : public Error {
public:
    using Error::Error;
};

class NonFiniteValue : public Error {
public:
    using Error::Error;
};

class UnsupportedSingularity : public Error {
public:
    using Error::Error;
};

class MeshMismatch : public Error {
public:
    using Error::Error;
};

class DenseLimitExceeded : public Error {
public:
    using Error::Error;
};

/// Iterative solver stopped at max_iters without meeting its tolerance.
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, std::size_t iterations, double residual, long step = -1)
        : Error(what), iterations_(iterations), residual_(residual), step_(step) {}

    std::size_t iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }
    /// Time step index at which the failure happened, -1 outside time stepping.
    long step() const noexcept { return step_; }

private:
    std::size_t iterations_;
    double residual_;
    long step_;
};

class InvalidP : public Error {
public:
    using Error::Error;
};

class TimeDependentSource : public Error {
public:
    using Error::Error;
};

class StepUnderflow : public Error {
public:
    using Error::Error;
};

/// The diminishing-step scheme hit its step cap before reaching the horizon.
class HorizonUnreachable : public Error {
public:
    HorizonUnreachable(const std::string& what, double covered) : Error(what), covered_(covered) {}
    double covered_time() const noexcept { return covered_; }

private:
    double covered_;
};

class EigenFailure : public Error {
public:
    using Error::Error;
};

class NonNestedMeshes : public Error {
public:
    using Error::Error;
};

class DegenerateFit : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration; carries the offending key and source line (0 if unknown).
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string key = {}, int line = 0)
        : Error(what), key_(std::move(key)), line_(line) {}
    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace nlplap
