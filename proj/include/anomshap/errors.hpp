#pragma once

#include <stdexcept>
#include <string>

namespace anomshap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the offending 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Not enough rows to build the requested partitions.
class SizingError : public Error {
 public:
  using Error::Error;
};

class ConstantFeatureError : public Error {
 public:
  ConstantFeatureError(const std::string& feature)
      : Error("constant feature '" + feature + "' has zero standard deviation"),
        feature_(feature) {}
  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// The score model lacks a capability (gradient, marginals) the caller needs.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Raised when a metric is undefined for its inputs (e.g. no positives).
class MetricError : public Error {
 public:
  using Error::Error;
};

class ModelFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace anomshap
