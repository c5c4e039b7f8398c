#pragma once

#include <stdexcept>
#include <string>

namespace synthlabel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension contract violated.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A hyperparameter or spec value is out of its valid range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input that makes a quantity undefined (zero vector under cosine, etc).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergedTrainingError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double violation)
      : Error(what), violation_(violation) {}
  double violation() const { return violation_; }

 private:
  double violation_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ProvenanceError : public Error {
 public:
  using Error::Error;
};

class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace synthlabel
