#pragma once

// Reference spectra for checking the solver: the closed-form eigenvalues of
// the 7-point Laplacian and a brute-force dense eigensolve for small
// operators.

#include "lobpcg/dense.hpp"
#include "lobpcg/operators.hpp"

#include <stdexcept>
#include <vector>

namespace lobpcg {

struct AnalyticEigenvalue {
  double value = 0.0;
  Index i = 1, j = 1, k = 1; // one-based mode numbers

  friend bool operator==(const AnalyticEigenvalue &, const AnalyticEigenvalue &) = default;
};

/// Eigenvalues of laplacian3d(grid), ascending. Equal values keep
/// lexicographic (i, j, k) order.
struct AnalyticSpectrum {
  Grid3D grid;
  std::vector<AnalyticEigenvalue> values;
};

/// lambda_{i,j,k} = 4 [sin^2(i pi / (2(nx+1))) + sin^2(j pi / (2(ny+1))) + sin^2(k pi / (2(nz+1)))]
///
/// The three terms are summed smallest first, so permuted mode triples on a
/// cube give bit-identical values.
double laplacian_eigenvalue(const Grid3D &grid, Index i, Index j, Index k);

/// The `count` smallest eigenvalues with their mode triples.
AnalyticSpectrum analytic_spectrum(const Grid3D &grid, Index count);
inline AnalyticSpectrum analytic_spectrum(const Grid3D &grid) {
  return analytic_spectrum(grid, grid.size());
}

/// The m smallest eigenvalues of laplacian3d(grid), ascending, multiplicities kept.
std::vector<double> exact_eigenvalues(const Grid3D &grid, Index m);

inline constexpr Index kDenseOracleLimit = 600;

/// All eigenvalues of a symmetric operator, ascending: assembles the dense
/// matrix from the operator's action on the identity and runs sym_eig on it.
template <typename Scalar = double>
DiagonalSpectrum<Scalar> dense_oracle_spectrum(const LinearOperator<Scalar> &op,
                                               Index n_limit = kDenseOracleLimit) {
  if (op.dim > n_limit)
    throw std::invalid_argument("dense_oracle_spectrum: dimension " + std::to_string(op.dim) +
                                " exceeds the limit " + std::to_string(n_limit));
  const SmallMatrix<Scalar> M = op(MultiVector<Scalar>::Identity(op.dim, op.dim));
  return sym_eig(M).values;
}

} // namespace lobpcg
