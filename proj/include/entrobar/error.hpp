#pragma once

#include <stdexcept>
#include <string>

namespace entrobar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: a malformed domain, a negative density, a bad config field.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A shifted grid density would leave its domain.
class SupportOverflowError : public Error {
public:
    using Error::Error;
};

/// A source density has an empty cell inside its active domain, so its CDF
/// cannot be inverted.
class DegenerateDensityError : public Error {
public:
    using Error::Error;
};

/// Discrete transport between clouds of different total mass, or too large.
class InfeasibleTransportError : public Error {
public:
    using Error::Error;
};

/// A fixed-point iteration did not reach its tolerance.
class NonConvergenceError : public Error {
public:
    using Error::Error;
};

/// Linearized operator would be singular or numerically meaningless.
class IllConditionedError : public Error {
public:
    using Error::Error;
};

/// A potential handed to the linearization is not strongly convex.
class NotConvexError : public Error {
public:
    using Error::Error;
};

}  // namespace entrobar
