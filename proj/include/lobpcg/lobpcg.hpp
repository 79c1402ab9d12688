#pragma once

// Locally optimal block preconditioned conjugate gradient for the m smallest
// eigenpairs of A x = lambda B x, with B-orthogonal constraints (hard locking)
// and an active index set (soft locking).
//
// Per outer iteration the solver applies T, B and A once each, to the active
// block only. It stores X, W, P with their A and B images (6 blocks when B is
// the identity, 9 otherwise).

#include "lobpcg/dense.hpp"
#include "lobpcg/multivec.hpp"
#include "lobpcg/operators.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace lobpcg {

enum class ConvergenceMode {
  Absolute, ///< ||r_j|| <= tol
  Relative, ///< ||r_j|| <= tol * ||A x_j||
};

struct SolverConfig {
  Index block_size = 1;
  double tol = 1e-6;
  int max_iter = 100;
  std::uint64_t seed = 0; ///< only used when no starting block is supplied
  bool lock_history = true;
  int verbosity = 0;
  ConvergenceMode mode = ConvergenceMode::Absolute;
  /// Cholesky pivots of the unit-diagonal basis Gram matrices at or below
  /// this value count as breakdowns and trigger the basis fallbacks.
  double basis_pivot_tol = 1e-10;

  void validate() const {
    if (block_size < 1)
      throw std::invalid_argument("SolverConfig: block_size must be at least 1");
    if (!(tol > 0.0))
      throw std::invalid_argument("SolverConfig: tol must be positive");
    if (max_iter < 1)
      throw std::invalid_argument("SolverConfig: max_iter must be at least 1");
  }
};

/// Constraint block Y with cached B*Y and the Cholesky factor of Y^T B Y.
template <typename Scalar = double>
struct Constraints {
  MultiVector<Scalar> Y;
  MultiVector<Scalar> BY;
  SmallMatrix<Scalar> YBY_chol;

  Index count() const { return Y.cols(); }
};

/// Throws NotSPD when the columns of Y are not B-independent.
template <typename Scalar = double>
Constraints<Scalar> make_constraints(MultiVector<Scalar> Y,
                                     const std::optional<LinearOperator<Scalar>> &B) {
  Constraints<Scalar> c;
  c.BY = B ? (*B)(Y) : Y;
  c.YBY_chol = Y.cols() > 0 ? cholesky(gram(Y, c.BY)) : SmallMatrix<Scalar>(0, 0);
  c.Y = std::move(Y);
  return c;
}

/// X - Y (Y^T B Y)^{-1} (BY)^T X, the B-orthogonal projection away from
/// span(Y). The inverse is applied through the cached Cholesky factor.
template <typename Scalar>
MultiVector<Scalar> apply_constraints(const MultiVector<Scalar> &X, const Constraints<Scalar> &c) {
  if (c.count() == 0 || X.cols() == 0)
    return X;
  if (X.rows() != c.Y.rows())
    throw DimensionMismatch("apply_constraints: row counts differ");
  SmallMatrix<Scalar> coeff = gram(c.BY, X);
  const auto R = c.YBY_chol.template triangularView<Eigen::Upper>();
  R.transpose().solveInPlace(coeff);
  R.solveInPlace(coeff);
  return X - c.Y * coeff;
}

/// B-orthonormalizes X in place: X <- X R^{-1} with R = chol(X^T B X), and
/// the cached images BX, AX follow without new operator applications.
/// Columns are scaled to unit B-norm before the factorization, so the
/// factorization only ever sees a unit-diagonal Gram matrix. Pass nullptr for
/// BX when B is the identity. Nothing is modified if NotSPD is thrown.
/// Returns the full factor R (including the column scaling).
template <typename Scalar>
SmallMatrix<Scalar> b_orthonormalize(MultiVector<Scalar> &X, MultiVector<Scalar> *BX,
                                     MultiVector<Scalar> *AX = nullptr, Scalar min_pivot = 0) {
  const Index k = X.cols();
  SmallMatrix<Scalar> G = gram(X, BX ? *BX : X);
  Vector<Scalar> scale(k);
  for (Index j = 0; j < k; ++j) {
    if (!(G(j, j) > Scalar(0)) || !std::isfinite(G(j, j)))
      throw NotSPD(j);
    scale(j) = std::sqrt(G(j, j));
  }
  const Vector<Scalar> inv = scale.cwiseInverse();
  G = inv.asDiagonal() * G * inv.asDiagonal();
  const SmallMatrix<Scalar> Rs = cholesky(G, min_pivot);

  auto normalize = [&](MultiVector<Scalar> &M) {
    M = M * inv.asDiagonal();
    M = tri_solve_right(M, Rs);
  };
  normalize(X);
  if (BX)
    normalize(*BX);
  if (AX)
    normalize(*AX);
  return Rs * scale.asDiagonal();
}

enum class SolverStatus { Converged, MaxIterReached, Failed };

inline std::string to_string(SolverStatus s) {
  switch (s) {
  case SolverStatus::Converged: return "converged";
  case SolverStatus::MaxIterReached: return "max_iter_reached";
  case SolverStatus::Failed: return "failed";
  }
  return "unknown";
}

/// Snapshot taken after the residual/locking step of an outer iteration.
struct IterationRecord {
  int iteration = 0;
  std::vector<double> ritz;     // all m columns, soft-locked included
  std::vector<double> residual; // 2-norms of A x_j - lambda_j B x_j
  std::vector<bool> active;     // membership in J after this iteration's locking
  Index active_count = 0;
  std::vector<Index> locked_now;
  double constraint_violation = 0.0; // max |Y^T B X|, 0 without constraints
  int fallbacks = 0;                 // basis repairs in the update that followed
};

template <typename Scalar = double>
struct SolverReport {
  DiagonalSpectrum<Scalar> eigenvalues;
  MultiVector<Scalar> eigenvectors;
  Vector<Scalar> residual_norms;
  std::vector<bool> converged;
  int iterations_used = 0;
  std::vector<IterationRecord> history; // iterations_used + 1 entries
  SolverStatus status = SolverStatus::Failed;
  std::string failure_reason;
  int basis_fallbacks = 0;

  Index converged_count() const {
    return std::count(converged.begin(), converged.end(), true);
  }
};

namespace detail {

template <typename Scalar>
void drop_column(MultiVector<Scalar> &M, Index j) {
  const Index cols = M.cols();
  if (j + 1 < cols)
    M.middleCols(j, cols - j - 1) = M.rightCols(cols - j - 1).eval();
  M.conservativeResize(Eigen::NoChange, cols - 1);
}

// Upper blocks of gramA and gramB over the basis [X W P]. X, W and P are each
// B-orthonormal, so the diagonal blocks of gramB are identities and the X
// block of gramA is the current Ritz values.
template <typename Scalar>
void assemble_gram(const DiagonalSpectrum<Scalar> &lambda, const MultiVector<Scalar> &X,
                   const MultiVector<Scalar> &W, const MultiVector<Scalar> &AW,
                   const MultiVector<Scalar> &BW, const MultiVector<Scalar> *P,
                   const MultiVector<Scalar> *AP, const MultiVector<Scalar> *BP,
                   SmallMatrix<Scalar> &gramA, SmallMatrix<Scalar> &gramB) {
  const Index m = X.cols(), a = W.cols(), p = P ? P->cols() : 0;
  const Index dim = m + a + p;
  gramA = SmallMatrix<Scalar>::Zero(dim, dim);
  gramB = SmallMatrix<Scalar>::Identity(dim, dim);

  gramA.topLeftCorner(m, m).diagonal() = lambda;
  gramA.block(0, m, m, a) = gram(X, AW);
  gramA.block(m, m, a, a) = gram(W, AW);
  gramB.block(0, m, m, a) = gram(X, BW);
  if (p > 0) {
    gramA.block(0, m + a, m, p) = gram(X, *AP);
    gramA.block(m, m + a, a, p) = gram(W, *AP);
    gramA.block(m + a, m + a, p, p) = gram(*P, *AP);
    gramB.block(0, m + a, m, p) = gram(X, *BP);
    gramB.block(m, m + a, a, p) = gram(W, *BP);
  }
}

} // namespace detail

/// Runs LOBPCG for the block_size smallest eigenpairs of (A, B).
///
/// B defaults to the identity, T to no preconditioning. Without X0 the
/// starting block is seeded_random_fill(n, m, cfg.seed). Converged columns
/// are soft-locked: their residuals leave the iteration for good while the
/// vectors stay in every Rayleigh-Ritz step.
///
/// Gram-matrix breakdowns are repaired in this order: drop P for the
/// iteration, then drop the failing W columns for the iteration; the run
/// ends as Failed only when nothing beyond X is left in the basis.
template <typename Scalar = double>
SolverReport<Scalar> solve(const LinearOperator<Scalar> &A,
                           const std::optional<LinearOperator<Scalar>> &B,
                           const std::optional<Preconditioner<Scalar>> &T,
                           const std::optional<Constraints<Scalar>> &Y,
                           const std::optional<MultiVector<Scalar>> &X0,
                           const SolverConfig &cfg) {
  using MV = MultiVector<Scalar>;
  using SM = SmallMatrix<Scalar>;
  cfg.validate();

  const Index n = A.dim;
  const Index m = cfg.block_size;
  const Index l = Y ? Y->count() : 0;
  const bool hasB = B.has_value();
  if (B && B->dim != n)
    throw DimensionMismatch("solve: B dimension differs from A");
  if (T && T->dim != n)
    throw DimensionMismatch("solve: T dimension differs from A");
  if (Y && l > 0 && Y->Y.rows() != n)
    throw DimensionMismatch("solve: constraint rows differ from A");
  if (m + l > n)
    throw DimensionMismatch("solve: block size plus constraint count exceeds n");
  if (X0 && (X0->rows() != n || X0->cols() != m))
    throw DimensionMismatch("solve: X0 must be n x block_size");
  if (X0 && !X0->allFinite())
    throw std::invalid_argument("solve: X0 has non-finite entries");

  const Scalar tol = static_cast<Scalar>(cfg.tol);
  const Scalar pivot_tol = static_cast<Scalar>(cfg.basis_pivot_tol);
  SolverReport<Scalar> report;
  MV X = X0 ? *X0 : seeded_random_fill<Scalar>(n, m, cfg.seed);
  MV AX, BX;
  DiagonalSpectrum<Scalar> lambda;
  Vector<Scalar> norms;

  auto finish = [&] {
    report.eigenvalues = lambda;
    report.eigenvectors = X;
    report.residual_norms = norms;
    report.converged.assign(static_cast<std::size_t>(m), false);
    for (Index j = 0; j < norms.size(); ++j) {
      Scalar threshold = tol;
      if (cfg.mode == ConvergenceMode::Relative)
        threshold *= AX.col(j).norm();
      report.converged[static_cast<std::size_t>(j)] = norms(j) <= threshold;
    }
    return report;
  };
  auto fail = [&](std::string reason) {
    report.status = SolverStatus::Failed;
    report.failure_reason = std::move(reason);
    return finish();
  };

  if (Y)
    X = apply_constraints(X, *Y);

  if (hasB)
    BX = (*B)(X);
  try {
    b_orthonormalize<Scalar>(X, hasB ? &BX : nullptr);
  } catch (const NotSPD &e) {
    return fail(std::string("initial block is rank deficient: ") + e.what());
  }
  AX = A(X);

  {
    const SymmetricEigen<Scalar> ritz = sym_eig(gram(X, AX));
    lambda = ritz.values;
    X = X * ritz.vectors;
    AX = AX * ritz.vectors;
    if (hasB)
      BX = BX * ritz.vectors;
  }

  std::vector<Index> J(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j)
    J[static_cast<std::size_t>(j)] = j;
  std::vector<bool> in_J(static_cast<std::size_t>(m), true);

  MV P, AP, BP;
  bool have_P = false;

  for (int k = 0;; ++k) {
    const MV &BXr = hasB ? BX : X;
    const MV residual = AX - BXr * lambda.asDiagonal();
    norms = column_norms(residual);

    IterationRecord rec;
    rec.iteration = k;
    std::vector<Index> still_active;
    for (Index j : J) {
      Scalar threshold = tol;
      if (cfg.mode == ConvergenceMode::Relative)
        threshold *= AX.col(j).norm();
      if (norms(j) <= threshold) {
        in_J[static_cast<std::size_t>(j)] = false;
        rec.locked_now.push_back(j);
      } else {
        still_active.push_back(j);
      }
    }
    J = std::move(still_active);

    rec.active_count = static_cast<Index>(J.size());
    if (cfg.lock_history) {
      rec.ritz.assign(lambda.data(), lambda.data() + m);
      rec.residual.assign(norms.data(), norms.data() + m);
      rec.active = in_J;
    }
    if (l > 0)
      rec.constraint_violation = static_cast<double>(gram(Y->BY, X).cwiseAbs().maxCoeff());
    report.history.push_back(std::move(rec));

    if (cfg.verbosity >= 2) {
      std::cout << "iter " << std::setw(4) << k << "  active " << std::setw(3) << J.size()
                << "  max resid " << std::scientific << std::setprecision(3)
                << norms.maxCoeff() << "  ritz[0] " << std::setprecision(12) << lambda(0)
                << std::defaultfloat << '\n';
    }

    if (J.empty()) {
      report.status = SolverStatus::Converged;
      break;
    }
    if (k == cfg.max_iter) {
      report.status = SolverStatus::MaxIterReached;
      break;
    }

    // this iteration's working set; J itself only shrinks through locking
    std::vector<Index> work = J;
    MV W = select_columns(residual, std::span<const Index>(work));
    if (T)
      W = (*T)(W);
    if (Y)
      W = apply_constraints(W, *Y);

    MV BW;
    if (hasB)
      BW = (*B)(W);
    int fallbacks = 0;
    for (;;) {
      try {
        b_orthonormalize<Scalar>(W, hasB ? &BW : nullptr, nullptr, pivot_tol);
        break;
      } catch (const NotSPD &e) {
        const Index bad = e.pivot();
        ++fallbacks;
        detail::drop_column(W, bad);
        if (hasB)
          detail::drop_column(BW, bad);
        work.erase(work.begin() + bad);
        if (work.empty()) {
          report.basis_fallbacks += fallbacks;
          report.history.back().fallbacks = fallbacks;
          return fail("basis degeneracy: every preconditioned residual is dependent");
        }
      }
    }
    MV AW = A(W);

    bool use_P = have_P;
    MV PJ, APJ, BPJ;
    if (use_P) {
      PJ = select_columns(P, std::span<const Index>(J));
      APJ = select_columns(AP, std::span<const Index>(J));
      if (hasB)
        BPJ = select_columns(BP, std::span<const Index>(J));
      try {
        b_orthonormalize<Scalar>(PJ, hasB ? &BPJ : nullptr, &APJ, pivot_tol);
      } catch (const NotSPD &) {
        use_P = false;
        ++fallbacks;
      }
    }

    SymmetricEigen<Scalar> rr;
    for (;;) {
      SM gramA, gramB;
      const MV &BWr = hasB ? BW : W;
      const MV &BPr = hasB ? BPJ : PJ;
      detail::assemble_gram<Scalar>(lambda, X, W, AW, BWr, use_P ? &PJ : nullptr,
                                    use_P ? &APJ : nullptr, use_P ? &BPr : nullptr, gramA,
                                    gramB);
      try {
        rr = gen_sym_eig(gramA, gramB, m, pivot_tol);
        break;
      } catch (const NotSPD &e) {
        ++fallbacks;
        const Index pivot = e.pivot();
        const Index a = W.cols();
        if (use_P && pivot >= m + a) {
          use_P = false;
        } else if (pivot >= m && pivot < m + a) {
          detail::drop_column(W, pivot - m);
          detail::drop_column(AW, pivot - m);
          if (hasB)
            detail::drop_column(BW, pivot - m);
          work.erase(work.begin() + (pivot - m));
        }
        if (W.cols() == 0 && !use_P) {
          report.basis_fallbacks += fallbacks;
          report.history.back().fallbacks = fallbacks;
          return fail("basis degeneracy: Rayleigh-Ritz basis collapsed to X");
        }
        if (pivot < m)
          return fail("basis degeneracy: Ritz block lost B-orthonormality");
      } catch (const NoConvergence &e) {
        return fail(e.what());
      }
    }
    report.basis_fallbacks += fallbacks;
    report.history.back().fallbacks = fallbacks;

    const Index a = W.cols();
    const SM CX = rr.vectors.topRows(m);
    const SM CW = rr.vectors.middleRows(m, a);
    P = W * CW;
    AP = AW * CW;
    if (hasB)
      BP = BW * CW;
    if (use_P) {
      const SM CP = rr.vectors.bottomRows(PJ.cols());
      P += PJ * CP;
      AP += APJ * CP;
      if (hasB)
        BP += BPJ * CP;
    }
    X = X * CX + P;
    AX = AX * CX + AP;
    if (hasB)
      BX = BX * CX + BP;
    lambda = rr.values;
    have_P = true;
    ++report.iterations_used;

    if (!X.allFinite())
      return fail("non-finite values in the Ritz block");
  }

  return finish();
}

template <typename Scalar = double>
struct StagedReport {
  DiagonalSpectrum<Scalar> eigenvalues;
  MultiVector<Scalar> eigenvectors;
  std::vector<bool> converged;
  std::vector<SolverReport<Scalar>> stages;
  SolverStatus status = SolverStatus::Converged;
};

/// Computes `total_wanted` eigenpairs with repeated block-size-`stage_block`
/// solves. Each stage is constrained to be B-orthogonal to every eigenvector
/// found by the stages before it (hard locking).
template <typename Scalar = double>
StagedReport<Scalar> solve_staged(const LinearOperator<Scalar> &A,
                                  const std::optional<LinearOperator<Scalar>> &B,
                                  const std::optional<Preconditioner<Scalar>> &T,
                                  Index total_wanted, Index stage_block, SolverConfig cfg) {
  if (stage_block < 1 || total_wanted < stage_block)
    throw std::invalid_argument("solve_staged: need total_wanted >= stage_block >= 1");
  const Index n = A.dim;
  StagedReport<Scalar> out;
  MultiVector<Scalar> locked(n, 0);
  std::vector<Scalar> values;
  const std::uint64_t base_seed = cfg.seed;
  cfg.block_size = stage_block;

  for (int stage = 0; static_cast<Index>(values.size()) < total_wanted; ++stage) {
    const Constraints<Scalar> cons = make_constraints<Scalar>(locked, B);
    cfg.seed = base_seed + static_cast<std::uint64_t>(stage);
    SolverReport<Scalar> rep = solve<Scalar>(A, B, T, cons, std::nullopt, cfg);
    if (rep.status == SolverStatus::Failed) {
      out.status = SolverStatus::Failed;
      out.stages.push_back(std::move(rep));
      break;
    }
    if (rep.status == SolverStatus::MaxIterReached)
      out.status = SolverStatus::MaxIterReached;

    const Index take = std::min(stage_block, total_wanted - static_cast<Index>(values.size()));
    locked.conservativeResize(Eigen::NoChange, locked.cols() + take);
    locked.rightCols(take) = rep.eigenvectors.leftCols(take);
    for (Index j = 0; j < take; ++j) {
      values.push_back(rep.eigenvalues(j));
      out.converged.push_back(rep.converged[static_cast<std::size_t>(j)]);
    }
    out.stages.push_back(std::move(rep));
  }

  const Index found = static_cast<Index>(values.size());
  std::vector<Index> order(static_cast<std::size_t>(found));
  for (Index j = 0; j < found; ++j)
    order[static_cast<std::size_t>(j)] = j;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(b)];
  });
  out.eigenvalues.resize(found);
  out.eigenvectors.resize(n, found);
  std::vector<bool> flags(static_cast<std::size_t>(found));
  for (Index j = 0; j < found; ++j) {
    const auto src = static_cast<std::size_t>(order[static_cast<std::size_t>(j)]);
    out.eigenvalues(j) = values[src];
    out.eigenvectors.col(j) = locked.col(static_cast<Index>(src));
    flags[static_cast<std::size_t>(j)] = out.converged[src];
  }
  out.converged = std::move(flags);
  return out;
}

} // namespace lobpcg
