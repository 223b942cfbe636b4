#pragma once

/**
 * @file errors.hpp
 * @brief Exception hierarchy for the point-process change detection library.
 *
 * Every failure mode that callers may want to distinguish gets its own
 * exception type.  All of them derive from std::runtime_error (via
 * pcd::Error) and carry an actionable message: what was wrong, what the
 * offending value was, and — where it makes sense — what the caller can do
 * about it.
 */

#include <stdexcept>
#include <string>

namespace pcd {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string & message) : std::runtime_error(message) {}
};

/// A numeric argument is outside its documented domain (negative rate,
/// interval length out of range, alpha not in (0,1), ...).
class InvalidParameterError : public Error {
  public:
    using Error::Error;
};

/// An observation interval (tau1, tau2] is ill-formed: reversed endpoints or
/// endpoints outside [0, 1].
class InvalidIntervalError : public Error {
  public:
    using Error::Error;
};

/// A window degenerates to length 0 or 1 where a statistic requires
/// 0 < tau2 - tau1 < 1.
class DegenerateWindowError : public Error {
  public:
    using Error::Error;
};

/// A parameter is formally valid but outside the range this implementation
/// supports (e.g. a Poisson mean too large for stable pmf recursion).
class UnsupportedParameterError : public Error {
  public:
    using Error::Error;
};

/// The observation scale L is too small for a multi-window procedure to be
/// well defined (empty window collections, zero-count level splits).
class UnsupportedScaleError : public Error {
  public:
    using Error::Error;
};

/// A Monte-Carlo calibration routine could not produce a usable critical
/// value (non-bracketing search, empty pool, ...).
class CalibrationFailureError : public Error {
  public:
    using Error::Error;
};

/// A detector was run without the critical values it needs and on-demand
/// calibration was disabled.  The message names the missing store query.
class CalibrationRequiredError : public Error {
  public:
    using Error::Error;
};

/// A simulation or benchmark budget is ill-formed (zero replications,
/// zero calibration draws where at least one is needed).
class BudgetError : public Error {
  public:
    using Error::Error;
};

/// An iterative numeric routine failed to converge to its documented
/// tolerance.
class NumericFailureError : public Error {
  public:
    using Error::Error;
};

}  // namespace pcd
