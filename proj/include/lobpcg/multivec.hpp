#pragma once

// Dense block storage for the eigensolver. A multivector is an n x k block of
// column vectors held column-major, so per-column work (norms, locking,
// selection of the active set) touches contiguous memory.

#include "lobpcg/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace lobpcg {

using Index = Eigen::Index;

template <typename Scalar = double>
using MultiVector = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

/// Small dense matrix: Gram matrices, Cholesky factors, Ritz coefficients.
template <typename Scalar = double>
using SmallMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

template <typename Scalar = double>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Ascending list of Ritz values or eigenvalues.
template <typename Scalar = double>
using DiagonalSpectrum = Vector<Scalar>;

/// Gram product X^T Y.
///
/// Every entry is a dot product with a fixed summation order, so
/// gram(X, Y) and gram(Y, X)^T agree bit for bit.
template <typename DerivedX, typename DerivedY>
SmallMatrix<typename DerivedX::Scalar> gram(const Eigen::MatrixBase<DerivedX> &X,
                                            const Eigen::MatrixBase<DerivedY> &Y) {
  using Scalar = typename DerivedX::Scalar;
  if (X.rows() != Y.rows())
    throw DimensionMismatch("gram: row counts differ");
  const Index n = X.rows();
  SmallMatrix<Scalar> G(X.cols(), Y.cols());
  for (Index j = 0; j < Y.cols(); ++j) {
    for (Index i = 0; i < X.cols(); ++i) {
      // four fixed partial sums; each term is a commutative product
      Scalar s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      Index r = 0;
      for (; r + 3 < n; r += 4) {
        s0 += X(r, i) * Y(r, j);
        s1 += X(r + 1, i) * Y(r + 1, j);
        s2 += X(r + 2, i) * Y(r + 2, j);
        s3 += X(r + 3, i) * Y(r + 3, j);
      }
      for (; r < n; ++r)
        s0 += X(r, i) * Y(r, j);
      G(i, j) = (s0 + s1) + (s2 + s3);
    }
  }
  return G;
}

/// X * C, the building block of every Ritz-vector update.
template <typename DerivedX, typename DerivedC>
MultiVector<typename DerivedX::Scalar>
linear_combination(const Eigen::MatrixBase<DerivedX> &X, const Eigen::MatrixBase<DerivedC> &C) {
  if (X.cols() != C.rows())
    throw DimensionMismatch("linear_combination: X.cols() != C.rows()");
  return X * C;
}

template <typename Derived>
Vector<typename Derived::Scalar> column_norms(const Eigen::MatrixBase<Derived> &X) {
  return X.colwise().norm().transpose();
}

/// Columns of X selected by `cols`, in order.
template <typename Derived>
MultiVector<typename Derived::Scalar> select_columns(const Eigen::MatrixBase<Derived> &X,
                                                     std::span<const Index> cols) {
  MultiVector<typename Derived::Scalar> out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    out.col(static_cast<Index>(c)) = X.col(cols[c]);
  return out;
}

/// xoshiro256** seeded through splitmix64. Platform independent, so a given
/// seed reproduces the same starting block everywhere.
class Xoshiro256 {
public:
  explicit Xoshiro256(std::uint64_t seed) {
    for (auto &word : state_) {
      seed += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      word = z ^ (z >> 31);
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (-1, 1).
  double symmetric_unit() {
    const double u = (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    return 2.0 * u - 1.0;
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

/// n x k block with entries uniform in (-1, 1), filled column by column.
template <typename Scalar = double>
MultiVector<Scalar> seeded_random_fill(Index n, Index k, std::uint64_t seed) {
  if (n < 1 || k < 1)
    throw DimensionMismatch("seeded_random_fill: n and k must be positive");
  Xoshiro256 rng(seed);
  MultiVector<Scalar> X(n, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < n; ++i)
      X(i, j) = static_cast<Scalar>(rng.symmetric_unit());
  return X;
}

} // namespace lobpcg
