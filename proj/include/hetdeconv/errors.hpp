#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hetdeconv {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// S(v) = sum_k |cf_k(v)|^2 fell below the numeric floor at a frequency.
class DegenerateDenominator : public Error {
public:
    DegenerateDenominator(double frequency, const std::string& what)
        : Error(what), frequency_(frequency) {}
    double frequency() const noexcept { return frequency_; }

private:
    double frequency_;
};

/// Validation of an error ensemble failed for the requested bandwidth.
class EnsembleInvalid : public Error {
public:
    EnsembleInvalid(double frequency, const std::string& what)
        : Error(what), frequency_(frequency) {}
    /// First offending frequency (in the ensemble's own units, v/b).
    double frequency() const noexcept { return frequency_; }

private:
    double frequency_;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// The covariate has zero spread; no slope can be fitted.
class DegenerateDesign : public Error {
public:
    using Error::Error;
};

/// Every grid point was flagged by the ridge floor.
class AllPointsExcluded : public Error {
public:
    using Error::Error;
};

}  // namespace hetdeconv
