#pragma once

#include <stdexcept>
#include <string>

namespace gshap {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A size limit (group count, table size) was exceeded.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed caller input: dimension mismatches, invalid labels, bad coalitions.
class InputError : public Error {
 public:
  using Error::Error;
};

// The operation needs every proper coalition value but some are missing.
class IncompleteTableError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

// A value function broke its contract (for example g(empty) != 0).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Requested feature is outside what the implementation supports.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Inconsistent scenario or simulation configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gshap
