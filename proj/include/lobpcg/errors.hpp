#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace lobpcg {

/// Operand shapes do not fit together.
class DimensionMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Cholesky hit a nonpositive or non-finite pivot. `pivot()` is the zero-based
/// column at which the factorization stopped; the leading `pivot()` columns
/// are numerically independent.
class NotSPD : public std::runtime_error {
public:
  explicit NotSPD(Eigen::Index pivot)
      : std::runtime_error("matrix is not positive definite at pivot " +
                           std::to_string(pivot)),
        pivot_(pivot) {}

  Eigen::Index pivot() const noexcept { return pivot_; }

private:
  Eigen::Index pivot_;
};

class SingularFactor : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NoConvergence : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Conjugate gradient met p'Ap <= 0, i.e. the operator is not SPD.
class PcgBreakdown : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace lobpcg
