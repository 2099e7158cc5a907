#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nsopen {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error {
public:
    using Error::Error;
};

/// A point was evaluated exactly on a branch-domain boundary.
class BoundaryError : public Error {
public:
    using Error::Error;
};

class ResolutionError : public Error {
public:
    using Error::Error;
};

class ConstructionError : public Error {
public:
    using Error::Error;
};

/// All mass escaped; carries the step at which it happened (1-based).
class TotalEscapeError : public Error {
public:
    TotalEscapeError(const std::string& what, std::size_t step = 0)
        : Error(what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class InvalidParametersError : public Error {
public:
    using Error::Error;
};

class SelectionError : public Error {
public:
    using Error::Error;
};

/// A falsifiable certificate could not be issued; `witness()` describes the counterexample.
class CertificationError : public Error {
public:
    CertificationError(const std::string& what, std::string witness)
        : Error(what), witness_(std::move(witness)) {}
    const std::string& witness() const { return witness_; }

private:
    std::string witness_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace nsopen
