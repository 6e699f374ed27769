#pragma once

#include <stdexcept>
#include <string>

namespace kacflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad parameters for a system, set or roof (wrong kind, weights not summing to one, ...).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// A set violates a validity constraint (e.g. t2 above the roof minimum on its base).
class InvalidSet : public ConfigurationError {
public:
    using ConfigurationError::ConfigurationError;
};

/// An orbit did not come back within the step budget. Diagnostic only.
class NonRecurrentWithinBudget : public Error {
public:
    NonRecurrentWithinBudget(double x, long long budget)
        : Error("orbit of x=" + std::to_string(x) + " did not reach the target set within " +
                std::to_string(budget) + " steps"),
          start(x), max_steps(budget) {}

    double start;
    long long max_steps;
};

class UnsupportedExactIntegration : public Error {
public:
    using Error::Error;
};

/// The roof dropped below its declared lower bound, or the declared bound is not positive.
class RoofBoundViolation : public Error {
public:
    using Error::Error;
};

/// The declared roof supremum is wrong or makes rejection sampling hopeless.
class BadSupBound : public Error {
public:
    using Error::Error;
};

class InvalidExitWidth : public Error {
public:
    using Error::Error;
};

class EmptyProjection : public Error {
public:
    using Error::Error;
};

class ZeroEntropyBase : public Error {
public:
    using Error::Error;
};

class ScaleRangeError : public Error {
public:
    using Error::Error;
};

} // namespace kacflow
