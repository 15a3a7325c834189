// errors.hpp - exception types shared by all qsync modules

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qsync {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A parameter or argument is outside the domain of the operation.
struct DomainError : Error {
    using Error::Error;
};

// Closed-form operators failed their self-checks (sign or branch bug).
struct ConventionError : Error {
    using Error::Error;
};

struct DegenerateSpectrumError : Error {
    using Error::Error;
};

struct StateValidationError : Error {
    using Error::Error;
};

struct NoUniqueSteadyStateError : Error {
    using Error::Error;
};

struct NonUniformGridError : Error {
    using Error::Error;
};

struct NotResolvableError : Error {
    using Error::Error;
};

struct InsufficientSpectrumError : Error {
    using Error::Error;
};

struct InversionError : Error {
    using Error::Error;
};

struct NoTransitionError : Error {
    using Error::Error;
};

struct ResolutionError : Error {
    ResolutionError(const std::string& what, double suggested_step)
        : Error(what), suggested_step(suggested_step) {}
    double suggested_step;
};

struct RankDeficiencyError : Error {
    RankDeficiencyError(const std::string& what, std::vector<std::size_t> nodes)
        : Error(what), unconstrained_nodes(std::move(nodes)) {}
    std::vector<std::size_t> unconstrained_nodes;
};

// Configuration problem tied to a named field (CLI exit code 2).
struct ConfigError : Error {
    ConfigError(const std::string& field, const std::string& message)
        : Error(field + ": " + message), field(field) {}
    std::string field;
};

} // namespace qsync
