#pragma once

#include <stdexcept>
#include <string>

namespace rtbm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model parameters violate a validity rule (PD, symmetry, dimensions).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A lattice sum could not be evaluated to the requested tolerance.
class ThetaError : public Error {
 public:
  using Error::Error;
};

/// A numerical oracle was asked for something outside its domain.
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace rtbm
