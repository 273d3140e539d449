#pragma once

#include <stdexcept>
#include <string>

namespace mba {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InstanceError : public Error {
 public:
  using Error::Error;
};

/// Raised when the simplex or column generation stops before optimality.
/// Carries the best primal objective found and the best known upper bound.
class LpError : public Error {
 public:
  LpError(const std::string& what, double primal_bound, double dual_bound)
      : Error(what), primal_bound_(primal_bound), dual_bound_(dual_bound) {}
  double primal_bound() const { return primal_bound_; }
  double dual_bound() const { return dual_bound_; }

 private:
  double primal_bound_;
  double dual_bound_;
};

class ProjectionError : public Error {
 public:
  ProjectionError(const std::string& what, double config_value,
                  double projected_value)
      : Error(what),
        config_value_(config_value),
        projected_value_(projected_value) {}
  double config_value() const { return config_value_; }
  double projected_value() const { return projected_value_; }

 private:
  double config_value_;
  double projected_value_;
};

class DecompositionError : public Error {
 public:
  using Error::Error;
};

class TransformError : public Error {
 public:
  using Error::Error;
};

class PipelineError : public Error {
 public:
  using Error::Error;
};

}  // namespace mba
