#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

// Root of every error raised by the library. The CLI maps subclasses to exit
// codes: usage-type errors to 1, numerical/model errors to 2.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Shape problems: non-square matrices, vector lengths that do not match.
class StructuralError : public Error {
public:
  using Error::Error;
};

// An argument outside the mathematical domain (x < 0, p > 1, n < 2, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

// A documented precondition of an operation was not met.
class ContractError : public Error {
public:
  using Error::Error;
};

class UnsupportedOperation : public Error {
public:
  using Error::Error;
};

// The eigenvalues of Q R^-1 do not split into the expected anti-stable and
// stable counts, i.e. the fluid queue has no stationary regime.
class ModelInstabilityError : public Error {
public:
  ModelInstabilityError(const std::string& what, int expected_anti_stable,
                        int found_anti_stable)
      : Error(what), expected(expected_anti_stable), found(found_anti_stable) {}

  int expected;
  int found;
};

class NumericalError : public Error {
public:
  NumericalError(const std::string& what, double condition_estimate = 0.0)
      : Error(what), condition(condition_estimate) {}

  double condition;
};

}  // namespace aoi
