#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nearopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised on violated preconditions (bad dimensions, negative weights, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an underlying conic solve does not reach optimality.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DomainError(what);
}

}  // namespace nearopt
