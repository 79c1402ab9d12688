#pragma once

// Matrix-free operators. A and B are only ever touched through block
// application, so anything that maps an n x k block to an n x k block can be
// plugged in: the built-in 7-point Laplacian, diagonal matrices, shifted
// pencils, or a few steps of PCG acting as a preconditioner.

#include "lobpcg/multivec.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

namespace lobpcg {

template <typename Scalar = double>
using BlockMap = std::function<MultiVector<Scalar>(const MultiVector<Scalar> &)>;

template <typename Scalar = double>
struct LinearOperator {
  Index dim = 0;
  BlockMap<Scalar> apply;
  bool symmetric = true;
  bool spd = false;
  /// Known diagonal, when the operator can report it without probing.
  std::optional<Vector<Scalar>> diagonal;

  MultiVector<Scalar> operator()(const MultiVector<Scalar> &X) const {
    if (X.rows() != dim)
      throw DimensionMismatch("LinearOperator: block has " + std::to_string(X.rows()) +
                              " rows, operator dimension is " + std::to_string(dim));
    return apply(X);
  }
};

/// T in the preconditioned residual T(AX - BX Lambda). `linear` is false for
/// maps such as fixed-step CG that depend nonlinearly on their input.
template <typename Scalar = double>
struct Preconditioner {
  Index dim = 0;
  BlockMap<Scalar> apply;
  bool linear = true;
  std::string description;

  MultiVector<Scalar> operator()(const MultiVector<Scalar> &X) const {
    if (X.rows() != dim)
      throw DimensionMismatch("Preconditioner: block has " + std::to_string(X.rows()) +
                              " rows, preconditioner dimension is " + std::to_string(dim));
    return apply(X);
  }
};

/// Interior points of an nx x ny x nz box, numbered i + nx*j + nx*ny*k.
struct Grid3D {
  Index nx = 1, ny = 1, nz = 1;

  Index size() const { return nx * ny * nz; }
  Index index(Index i, Index j, Index k) const { return i + nx * (j + ny * k); }
  bool valid() const { return nx >= 1 && ny >= 1 && nz >= 1; }

  friend bool operator==(const Grid3D &, const Grid3D &) = default;
};

template <typename Scalar = double>
LinearOperator<Scalar> identity_operator(Index n) {
  LinearOperator<Scalar> op;
  op.dim = n;
  op.apply = [](const MultiVector<Scalar> &X) { return X; };
  op.spd = true;
  op.diagonal = Vector<Scalar>::Ones(n);
  return op;
}

template <typename Scalar = double>
LinearOperator<Scalar> diagonal_operator(Vector<Scalar> d) {
  LinearOperator<Scalar> op;
  op.dim = d.size();
  op.spd = (d.array() > Scalar(0)).all();
  op.diagonal = d;
  op.apply = [d = std::move(d)](const MultiVector<Scalar> &X) -> MultiVector<Scalar> {
    return d.asDiagonal() * X;
  };
  return op;
}

/// Wraps an explicit symmetric matrix. Mostly useful in tests.
template <typename Scalar = double>
LinearOperator<Scalar> dense_operator(SmallMatrix<Scalar> M) {
  if (M.rows() != M.cols())
    throw DimensionMismatch("dense_operator: matrix is not square");
  LinearOperator<Scalar> op;
  op.dim = M.rows();
  op.symmetric = M.isApprox(M.transpose(), Scalar(1e-14));
  op.diagonal = M.diagonal();
  op.apply = [M = std::move(M)](const MultiVector<Scalar> &X) -> MultiVector<Scalar> {
    return M * X;
  };
  return op;
}

/// Unscaled 7-point Laplacian with homogeneous Dirichlet boundaries:
/// (Ax)_p = 6 x_p - sum of the in-grid axis neighbours of p.
template <typename Scalar = double>
LinearOperator<Scalar> laplacian3d(const Grid3D &grid) {
  if (!grid.valid())
    throw DimensionMismatch("laplacian3d: grid extents must be positive");
  LinearOperator<Scalar> op;
  op.dim = grid.size();
  op.spd = true;
  op.diagonal = Vector<Scalar>::Constant(grid.size(), Scalar(6));
  op.apply = [grid](const MultiVector<Scalar> &X) {
    const Index nx = grid.nx, ny = grid.ny, nz = grid.nz;
    const Index sy = nx, sz = nx * ny;
    MultiVector<Scalar> Y(X.rows(), X.cols());
    for (Index c = 0; c < X.cols(); ++c) {
      const Scalar *x = X.col(c).data();
      Scalar *y = Y.col(c).data();
      for (Index k = 0; k < nz; ++k) {
        for (Index j = 0; j < ny; ++j) {
          for (Index i = 0; i < nx; ++i) {
            const Index p = grid.index(i, j, k);
            Scalar v = Scalar(6) * x[p];
            if (i > 0) v -= x[p - 1];
            if (i + 1 < nx) v -= x[p + 1];
            if (j > 0) v -= x[p - sy];
            if (j + 1 < ny) v -= x[p + sy];
            if (k > 0) v -= x[p - sz];
            if (k + 1 < nz) v -= x[p + sz];
            y[p] = v;
          }
        }
      }
    }
    return Y;
  };
  return op;
}

/// A + alpha * B. The eigenvectors of the pencil are unchanged and every
/// eigenvalue moves by alpha.
template <typename Scalar = double>
LinearOperator<Scalar> shift_operator(LinearOperator<Scalar> A, LinearOperator<Scalar> B,
                                      Scalar alpha) {
  if (A.dim != B.dim)
    throw DimensionMismatch("shift_operator: A and B dimensions differ");
  LinearOperator<Scalar> op;
  op.dim = A.dim;
  op.symmetric = A.symmetric && B.symmetric;
  op.spd = false;
  if (A.diagonal && B.diagonal)
    op.diagonal = Vector<Scalar>(*A.diagonal + alpha * *B.diagonal);
  op.apply = [A = std::move(A), B = std::move(B), alpha](const MultiVector<Scalar> &X) {
    MultiVector<Scalar> Y = A(X);
    if (alpha != Scalar(0))
      Y += alpha * B(X);
    return Y;
  };
  return op;
}

/// Diagonal of an operator by applying it to every coordinate vector.
/// Costs n applications.
template <typename Scalar = double>
Vector<Scalar> probe_diagonal(const LinearOperator<Scalar> &op) {
  Vector<Scalar> d(op.dim);
  MultiVector<Scalar> e = MultiVector<Scalar>::Zero(op.dim, 1);
  for (Index i = 0; i < op.dim; ++i) {
    e(i, 0) = Scalar(1);
    d(i) = op(e)(i, 0);
    e(i, 0) = Scalar(0);
  }
  return d;
}

template <typename Scalar = double>
Preconditioner<Scalar> identity_preconditioner(Index n) {
  return {n, [](const MultiVector<Scalar> &X) { return X; }, true, "none"};
}

enum class DiagonalProbe { Forbid, Allow };

/// x -> D^{-1} x with D = diag(op). Uses the operator's own diagonal when it
/// has one; otherwise probing must be requested explicitly.
template <typename Scalar = double>
Preconditioner<Scalar> jacobi_preconditioner(const LinearOperator<Scalar> &op,
                                             DiagonalProbe probe = DiagonalProbe::Forbid) {
  Vector<Scalar> d;
  if (op.diagonal)
    d = *op.diagonal;
  else if (probe == DiagonalProbe::Allow)
    d = probe_diagonal(op);
  else
    throw std::invalid_argument("jacobi_preconditioner: operator has no known diagonal; "
                                "pass DiagonalProbe::Allow to probe it");
  for (Index i = 0; i < d.size(); ++i)
    if (!(d(i) > Scalar(0)))
      throw std::invalid_argument("jacobi_preconditioner: nonpositive diagonal entry at " +
                                  std::to_string(i));
  Vector<Scalar> inv = d.cwiseInverse();
  return {op.dim,
          [inv = std::move(inv)](const MultiVector<Scalar> &X) -> MultiVector<Scalar> {
            return inv.asDiagonal() * X;
          },
          true, "jacobi"};
}

/// Preconditioned conjugate gradient for A x = b from x0 = 0. Runs at most
/// `max_iter` steps and stops early once ||b - A x|| <= rtol ||b||; rtol = 0
/// turns the early exit off (an exactly zero residual still stops).
template <typename Scalar = double>
Vector<Scalar> pcg_solve(const LinearOperator<Scalar> &A, const Preconditioner<Scalar> &M,
                         const Vector<Scalar> &b, int max_iter, Scalar rtol) {
  if (b.size() != A.dim || M.dim != A.dim)
    throw DimensionMismatch("pcg_solve: dimensions differ");
  if (max_iter < 1)
    throw std::invalid_argument("pcg_solve: max_iter must be at least 1");

  using MV = MultiVector<Scalar>;
  Vector<Scalar> x = Vector<Scalar>::Zero(b.size());
  Vector<Scalar> r = b;
  const Scalar stop = rtol * b.norm();
  Scalar rnorm = r.norm();
  if (rnorm == Scalar(0) || rnorm <= stop)
    return x;

  Vector<Scalar> z = M(MV(r));
  Vector<Scalar> p = z;
  Scalar rz = r.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    const Vector<Scalar> Ap = A(MV(p));
    const Scalar pAp = p.dot(Ap);
    if (!(pAp > Scalar(0)) || !std::isfinite(pAp))
      throw PcgBreakdown("pcg_solve: p'Ap = " + std::to_string(double(pAp)));
    const Scalar alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    rnorm = r.norm();
    if (rnorm == Scalar(0) || rnorm <= stop || it + 1 == max_iter)
      break;
    z = M(MV(r));
    const Scalar rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return x;
}

/// T b = (steps of PCG on A x = b from zero), column by column.
///
/// Not a linear map of b, so the usual LOBPCG convergence theory does not
/// cover it; it is still a useful knob for preconditioner quality.
template <typename Scalar = double>
Preconditioner<Scalar> inner_pcg_preconditioner(LinearOperator<Scalar> A,
                                                Preconditioner<Scalar> inner, int steps) {
  if (steps < 1)
    throw std::invalid_argument("inner_pcg_preconditioner: steps must be at least 1");
  const Index n = A.dim;
  std::string desc = "pcg:" + std::to_string(steps) + "(" + inner.description + ")";
  return {n,
          [A = std::move(A), inner = std::move(inner), steps](const MultiVector<Scalar> &X) {
            MultiVector<Scalar> Y(X.rows(), X.cols());
            for (Index c = 0; c < X.cols(); ++c)
              Y.col(c) = pcg_solve<Scalar>(A, inner, X.col(c), steps, Scalar(0));
            return Y;
          },
          false, std::move(desc)};
}

} // namespace lobpcg
