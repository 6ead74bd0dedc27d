#pragma once

#include <stdexcept>
#include <string>

namespace mfgan {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arithmetic evaluated outside its domain (log of a non-positive value,
/// division by zero, exp overflow). `node()` is the offending tape node, or
/// -1 when the operation was folded without a tape.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, long node) : Error(what), node_(node) {}
  long node() const noexcept { return node_; }

 private:
  long node_;
};

class OverflowError : public DomainError {
 public:
  using DomainError::DomainError;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingHamiltonian : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

class ZeroReference : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class EmptySamples : public Error {
 public:
  using Error::Error;
};

class OutOfSupport : public Error {
 public:
  using Error::Error;
};

}  // namespace mfgan
