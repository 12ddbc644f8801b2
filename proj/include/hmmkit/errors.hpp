#pragma once

#include <stdexcept>
#include <string>

namespace hmmkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes do not agree with the model layout.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input outside the domain of a map or density (zero TPM diagonal, negative count, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra breakdown, e.g. a singular stationary system.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A function evaluation produced NaN/inf, or a derivative does not exist at the point.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Brute-force enumeration requested on an instance that is too large.
class SizeError : public Error {
 public:
  using Error::Error;
};

class CovarianceUnavailable : public Error {
 public:
  CovarianceUnavailable(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}
  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

class BootstrapUnreliable : public Error {
 public:
  using Error::Error;
};

class StudyDegenerate : public Error {
 public:
  using Error::Error;
};

class DegenerateData : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration; the message carries the location.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace hmmkit
