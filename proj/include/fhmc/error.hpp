#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace fhmc {

enum class ErrorKind { io, parse, validation, domain, numerical };

// Base of every error raised by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class IoError : public Error {
public:
  explicit IoError(const std::string &what) : Error(ErrorKind::io, what) {}
};

class ParseError : public Error {
public:
  explicit ParseError(const std::string &what)
      : Error(ErrorKind::parse, what) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string &what)
      : Error(ErrorKind::validation, what) {}
};

class DomainError : public Error {
public:
  explicit DomainError(const std::string &what)
      : Error(ErrorKind::domain, what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string &what)
      : Error(ErrorKind::numerical, what) {}
};

// Non-finite gradient during a leapfrog trajectory.
class DivergenceError : public NumericalError {
public:
  DivergenceError(const std::string &what, Eigen::VectorXd state)
      : NumericalError(what), state_(std::move(state)) {}

  const Eigen::VectorXd &state() const noexcept { return state_; }

private:
  Eigen::VectorXd state_;
};

// Sampler configuration unusable for the target (e.g. too many divergences).
class TuningError : public NumericalError {
public:
  explicit TuningError(const std::string &what) : NumericalError(what) {}
};

// Classifier training failed to make progress.
class TrainingError : public NumericalError {
public:
  explicit TrainingError(const std::string &what) : NumericalError(what) {}
};

// Metric is mathematically undefined for the given input.
class UndefinedMetricError : public NumericalError {
public:
  explicit UndefinedMetricError(const std::string &what)
      : NumericalError(what) {}
};

} // namespace fhmc
