#pragma once

// Small dense kernels for the Rayleigh-Ritz step: Cholesky, triangular
// solves, and symmetric / generalized symmetric eigendecompositions.

#include "lobpcg/multivec.hpp"

#include <Eigen/Core>
#include <Eigen/Jacobi>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace lobpcg {

template <typename Scalar = double>
struct SymmetricEigen {
  DiagonalSpectrum<Scalar> values; // ascending
  SmallMatrix<Scalar> vectors;     // column j pairs with values[j]
};

/// Upper-triangular R with R^T R = G. Only the upper triangle of G is read.
///
/// Throws NotSPD(j) when pivot j is not finite or not above
/// min_pivot * G(j, j). With min_pivot = 0 only nonpositive pivots fail; a
/// positive min_pivot also rejects columns that are numerically dependent on
/// the ones before them.
template <typename Derived>
SmallMatrix<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived> &G,
                                               typename Derived::Scalar min_pivot = 0) {
  using Scalar = typename Derived::Scalar;
  if (G.rows() != G.cols())
    throw DimensionMismatch("cholesky: matrix is not square");
  const Index k = G.rows();
  SmallMatrix<Scalar> R = SmallMatrix<Scalar>::Zero(k, k);
  for (Index j = 0; j < k; ++j) {
    Scalar d = G(j, j);
    for (Index p = 0; p < j; ++p)
      d -= R(p, j) * R(p, j);
    if (!(d > Scalar(0)) || !(d > min_pivot * G(j, j)) || !std::isfinite(d))
      throw NotSPD(j);
    const Scalar rjj = std::sqrt(d);
    R(j, j) = rjj;
    for (Index i = j + 1; i < k; ++i) {
      Scalar s = G(j, i);
      for (Index p = 0; p < j; ++p)
        s -= R(p, j) * R(p, i);
      R(j, i) = s / rjj;
    }
  }
  return R;
}

/// X * R^{-1} for upper-triangular R, by substitution.
template <typename DerivedX, typename DerivedR>
MultiVector<typename DerivedX::Scalar> tri_solve_right(const Eigen::MatrixBase<DerivedX> &X,
                                                       const Eigen::MatrixBase<DerivedR> &R) {
  using Scalar = typename DerivedX::Scalar;
  if (R.rows() != R.cols() || R.rows() != X.cols())
    throw DimensionMismatch("tri_solve_right: R must be k x k with k = X.cols()");
  for (Index j = 0; j < R.rows(); ++j)
    if (R(j, j) == Scalar(0))
      throw SingularFactor("tri_solve_right: zero on the diagonal of R");
  MultiVector<Scalar> out = X;
  R.template triangularView<Eigen::Upper>().template solveInPlace<Eigen::OnTheRight>(out);
  return out;
}

/// R^{-1} * C for upper-triangular R.
template <typename DerivedR, typename DerivedC>
SmallMatrix<typename DerivedR::Scalar> tri_solve_left(const Eigen::MatrixBase<DerivedR> &R,
                                                      const Eigen::MatrixBase<DerivedC> &C) {
  if (R.rows() != R.cols() || R.cols() != C.rows())
    throw DimensionMismatch("tri_solve_left: R must be k x k with k = C.rows()");
  SmallMatrix<typename DerivedR::Scalar> out = C;
  R.template triangularView<Eigen::Upper>().solveInPlace(out);
  return out;
}

inline constexpr int kJacobiSweepCap = 100;

/// Cyclic Jacobi eigensolver for a symmetric matrix given by its upper
/// triangle. Stops once the off-diagonal Frobenius norm drops to
/// 1e-14 * ||G||_F; throws NoConvergence after kJacobiSweepCap sweeps.
template <typename Derived>
SymmetricEigen<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived> &G) {
  using Scalar = typename Derived::Scalar;
  using Matrix = SmallMatrix<Scalar>;
  if (G.rows() != G.cols())
    throw DimensionMismatch("sym_eig: matrix is not square");
  if (!G.allFinite())
    throw NoConvergence("sym_eig: non-finite input");

  const Index k = G.rows();
  Matrix A = G.template selfadjointView<Eigen::Upper>();
  Matrix V = Matrix::Identity(k, k);

  const Scalar threshold = Scalar(1e-14) * A.norm();
  auto off_norm = [&] {
    Scalar s = 0;
    for (Index j = 1; j < k; ++j)
      for (Index i = 0; i < j; ++i)
        s += A(i, j) * A(i, j);
    return std::sqrt(Scalar(2) * s);
  };

  int sweep = 0;
  for (; sweep < kJacobiSweepCap && off_norm() > threshold; ++sweep) {
    for (Index p = 0; p + 1 < k; ++p) {
      for (Index q = p + 1; q < k; ++q) {
        if (A(p, q) == Scalar(0))
          continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(A, p, q);
        A.applyOnTheLeft(p, q, rot.adjoint());
        A.applyOnTheRight(p, q, rot);
        V.applyOnTheRight(p, q, rot);
        A(p, q) = A(q, p) = Scalar(0);
      }
    }
  }
  if (sweep == kJacobiSweepCap && off_norm() > threshold)
    throw NoConvergence("sym_eig: Jacobi sweep cap reached");

  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return A(a, a) < A(b, b); });

  SymmetricEigen<Scalar> out{DiagonalSpectrum<Scalar>(k), Matrix(k, k)};
  for (Index j = 0; j < k; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.values(j) = A(src, src);
    out.vectors.col(j) = V.col(src);
  }
  return out;
}

/// The `want` smallest eigenpairs of gramA C = gramB C Lambda, with
/// C^T gramB C = I. Both matrices are read from their upper triangles.
///
/// Reduces to a standard problem through R = chol(gramB):
/// R^{-T} gramA R^{-1} Q = Q Lambda, C = R^{-1} Q.
/// NotSPD from the factorization of gramB propagates to the caller.
template <typename DerivedA, typename DerivedB>
SymmetricEigen<typename DerivedA::Scalar> gen_sym_eig(const Eigen::MatrixBase<DerivedA> &gramA,
                                                      const Eigen::MatrixBase<DerivedB> &gramB,
                                                      Index want,
                                                      typename DerivedA::Scalar min_pivot = 0) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = SmallMatrix<Scalar>;
  if (gramA.rows() != gramA.cols() || gramB.rows() != gramB.cols() ||
      gramA.rows() != gramB.rows())
    throw DimensionMismatch("gen_sym_eig: pencil dimensions differ");
  if (want < 0 || want > gramA.rows())
    throw DimensionMismatch("gen_sym_eig: want exceeds the pencil dimension");

  const Matrix R = cholesky(gramB, min_pivot);
  const Matrix A = gramA.template selfadjointView<Eigen::Upper>();
  // R^{-T} A R^{-1} = (A R^{-1})^T R^{-1} since A is symmetric
  const Matrix AR = tri_solve_right(A, R);
  const Matrix reduced = tri_solve_right(Matrix(AR.transpose()), R);

  SymmetricEigen<Scalar> std_eig = sym_eig(reduced);
  SymmetricEigen<Scalar> out;
  out.values = std_eig.values.head(want);
  out.vectors = tri_solve_left(R, std_eig.vectors.leftCols(want));
  return out;
}

} // namespace lobpcg
