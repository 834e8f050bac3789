#ifndef BETASC_ERRORS_HPP
#define BETASC_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace betasc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the function (e.g. x outside [0,1]).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A model parameter violates a precondition (beta <= 1, k < 1, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A density with non-positive mass or expectation was handed to an operation needing one.
class DegenerateDensityError : public Error {
public:
    using Error::Error;
};

/// The slope computed from a density fell to 1 or below.
class SlopeRangeError : public Error {
public:
    using Error::Error;
};

/// Ergodic estimation failed (zero orbit sum).
class EstimationError : public Error {
public:
    using Error::Error;
};

/// The strong-coupling threshold is undefined because F(1/E - 2) vanishes.
class ThresholdUndefinedError : public Error {
public:
    using Error::Error;
};

/// A time window does not lie inside the available statistics.
class RangeError : public Error {
public:
    using Error::Error;
};

/// A trajectory inside an ensemble failed; carries the pool index.
class EnsembleError : public Error {
public:
    EnsembleError(std::size_t index, const std::string& what)
        : Error("trajectory " + std::to_string(index) + ": " + what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

} // namespace betasc

#endif // BETASC_ERRORS_HPP
