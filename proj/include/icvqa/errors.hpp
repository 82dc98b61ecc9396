#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace icvqa {

// Array or register dimensions that do not fit the operation.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Qubit or variable index outside the valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Invalid generator, ansatz or run parameters.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The problem has no feasible basis state.
class InfeasibleInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// f_max == f_min over the feasible set, so the approximation ratio is undefined.
class DegenerateInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The state carries no probability mass on feasible basis states.
class EmptyFeasibleSupport : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The optimizer objective or a constraint returned a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::vector<double> params)
      : std::runtime_error(what), params_(std::move(params)) {}

  const std::vector<double>& params() const noexcept { return params_; }

 private:
  std::vector<double> params_;
};

}  // namespace icvqa
