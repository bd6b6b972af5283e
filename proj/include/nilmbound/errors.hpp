#pragma once

#include <stdexcept>
#include <string>

namespace nilmbound {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input document (catalog, scenario, table). The message carries
/// the line/field location when known.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A well-formed document that violates a domain invariant (e.g. a
/// discontinuous piecewise signature). Message names the offending record.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical routine could not reach its requested tolerance.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double achieved)
        : Error(what), achieved_tolerance(achieved) {}

    double achieved_tolerance;
};

/// The effective feasible set of a scheduling problem is empty.
class InfeasibleSetError : public Error {
public:
    using Error::Error;
};

/// The correlation matrix is singular or too ill-conditioned for a
/// trustworthy gradient.
class GradientUnavailableError : public Error {
public:
    GradientUnavailableError(const std::string& what, double condition)
        : Error(what), condition_estimate(condition) {}

    double condition_estimate;
};

/// Every multistart attempt of the schedule search failed to evaluate.
class OptimizationFailedError : public Error {
public:
    using Error::Error;
};

}  // namespace nilmbound
