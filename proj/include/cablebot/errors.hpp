#pragma once

#include <stdexcept>
#include <string>

namespace cablebot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wire origin and anchor coincide, so no direction is defined.
class DegenerateWire : public Error {
 public:
  using Error::Error;
};

/// A gravity-compensation solution was computed for a different pose.
class StaleJacobian : public Error {
 public:
  using Error::Error;
};

/// Winch identification produced a negative load-friction coefficient.
class NegativeFriction : public Error {
 public:
  using Error::Error;
};

/// Manipulation target outside a leg's reachable annulus.
class Unreachable : public Error {
 public:
  Unreachable(const std::string& what, int leg) : Error(what), leg_(leg) {}
  /// 0 = left, 1 = right.
  int leg() const noexcept { return leg_; }

 private:
  int leg_;
};

/// Simulation blew up (body speed above the divergence bound).
class NumericalDivergence : public Error {
 public:
  using Error::Error;
};

class AlreadyAttached : public Error {
 public:
  using Error::Error;
};

class NotAttached : public Error {
 public:
  using Error::Error;
};

/// Script or configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A named scenario assertion did not hold.
class AssertionFailed : public Error {
 public:
  using Error::Error;
};

/// A log file lacks a column a consumer requires.
class MissingColumn : public Error {
 public:
  using Error::Error;
};

class BindError : public Error {
 public:
  using Error::Error;
};

}  // namespace cablebot
