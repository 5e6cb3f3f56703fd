#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sgsadmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape, partition or dimension mismatch.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the admissible range (e.g. a step length).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A factorization or eigendecomposition failed, or a block that must be
/// positive definite is not.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An operator declared positive semidefinite produced a negative quadratic
/// form beyond tolerance, or CG hit a nonpositive curvature direction.
class IndefiniteError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Requested combination of function kind and metric has no closed form.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// A precondition or postcondition of an algorithmic step was violated, such
/// as an inner solver returning a certificate above its bound.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace sgsadmm
