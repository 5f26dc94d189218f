#pragma once

#include <stdexcept>
#include <string>

namespace nvmix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid inputs: bad limits, non-PSD scale, out-of-range parameters.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A user-supplied quantile function returned a negative or non-finite value.
class InvalidMixtureError : public DomainError {
 public:
  using DomainError::DomainError;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace nvmix
