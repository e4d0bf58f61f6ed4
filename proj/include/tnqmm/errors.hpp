#pragma once

#include <stdexcept>
#include <string>

namespace tnqmm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A model value violates its type invariants (stochasticity, completeness, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

class NonpositiveNormalizationError : public ModelError {
 public:
  using ModelError::ModelError;
};

class ZeroProbabilityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedConstraintError : public Error {
 public:
  using Error::Error;
};

class StateSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

// Raised by conversions whose mathematical preconditions fail.
class ConversionError : public Error {
 public:
  using Error::Error;
};

class DegenerateSpectrumError : public ConversionError {
 public:
  using ConversionError::ConversionError;
};

class SingularFixedPointError : public ConversionError {
 public:
  using ConversionError::ConversionError;
};

class ApproximationError : public ConversionError {
 public:
  ApproximationError(const std::string& what, double residual)
      : ConversionError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class TrainingFailure : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tnqmm
