#pragma once

#include <stdexcept>
#include <string>

namespace degint {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class MatrixOverflow : public Error {
 public:
  using Error::Error;
};

/// The UL splitting exists only on a dense open subset of the group.
class FactorizationNotDefined : public Error {
 public:
  using Error::Error;
};

class NearDegenerateSpectrum : public Error {
 public:
  using Error::Error;
};

class SingularChart : public Error {
 public:
  using Error::Error;
};

/// Raised by closed-form evaluators whose formula is singular at the point.
class SingularPoint : public Error {
 public:
  using Error::Error;
};

class Collision : public Error {
 public:
  using Error::Error;
};

/// No candidate closed form agrees with its linear-algebra oracle.
class FormulaMismatch : public Error {
 public:
  using Error::Error;
};

/// Two evaluation routes of the same quantity disagree.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ReductionFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace degint
