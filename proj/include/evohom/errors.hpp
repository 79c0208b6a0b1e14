#pragma once

#include <stdexcept>
#include <string>

namespace evohom {

// Base of all library errors. The CLI maps the concrete type to an exit code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the admissible domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// Invalid or inconsistent experiment configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Breakdown of a numerical procedure (non-finite values, non-convergence).
class NumericalError : public Error {
public:
  using Error::Error;
};

// Invalid input to a data-structure builder (index out of range, merge mismatch).
class ConstructionError : public Error {
public:
  using Error::Error;
};

class MeshQualityError : public Error {
public:
  using Error::Error;
};

} // namespace evohom
