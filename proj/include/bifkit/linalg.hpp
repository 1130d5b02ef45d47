#pragma once

#include <memory>

#include "bifkit/types.hpp"

namespace bifkit {

/// Sparse LU (partial pivoting, COLAMD ordering) of a square real matrix.
/// Immutable after construction; copies share the factors.
class Factorization {
 public:
  Factorization() = default;
  /// Throws SingularMatrixError when a pivot falls below
  /// 1e-14 * (largest row 2-norm of A).
  explicit Factorization(const SparseMatrix& A);

  [[nodiscard]] bool valid() const { return impl_ != nullptr; }
  [[nodiscard]] Index size() const;
  /// Sign of det(A): +1 or -1.
  [[nodiscard]] int determinant_sign() const;
  /// Smallest |pivot| relative to the largest row norm.
  [[nodiscard]] double min_relative_pivot() const;

  [[nodiscard]] Vec solve(const Vec& b, bool transpose = false) const;
  [[nodiscard]] Mat solve(const Mat& B, bool transpose = false) const;
  /// Real matrix, complex right-hand side. With transpose set this solves
  /// A^T x = b, which for a real A is also the adjoint solve.
  [[nodiscard]] CVec solve(const CVec& b, bool transpose = false) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

Factorization factor(const SparseMatrix& A);
Vec solve(const Factorization& f, const Vec& b, bool transpose = false);

/// Factorization of A + s B for complex s, carried out in real arithmetic on
/// the doubled system [[A + Re(s) B, -Im(s) B], [Im(s) B, A + Re(s) B]].
class ComplexFactorization {
 public:
  ComplexFactorization() = default;
  ComplexFactorization(const SparseMatrix& A, const SparseMatrix& B, complex s);

  [[nodiscard]] Index size() const { return n_; }
  /// Solves (A + sB) x = b, or (A + sB)^H x = b when adjoint is set.
  [[nodiscard]] CVec solve(const CVec& b, bool adjoint = false) const;

 private:
  Index n_ = 0;
  bool real_shift_ = true;
  Factorization lu_;
};

/// [[core, border_cols], [border_rows, corner]] with k borders.
struct BorderedSystem {
  SparseMatrix core;  // n x n
  Mat border_cols;    // n x k
  Mat border_rows;    // k x n
  Mat corner;         // k x k

  [[nodiscard]] Index n() const { return core.rows(); }
  [[nodiscard]] Index k() const { return corner.rows(); }
};

struct BorderedSolution {
  Vec top;
  Vec bottom;
  /// core^{-1} border_cols (n x k).
  Mat core_solves;
};

/// Block Schur elimination using only solves with `core_factorization`
/// plus dense k x k algebra. Singular Schur complement -> bordered_singular.
BorderedSolution solve_bordered(const BorderedSystem& sys, const Vec& rhs_top,
                                const Vec& rhs_bottom, const Factorization& core_factorization);

/// The (n+k) x (n+k) assembled matrix.
SparseMatrix assemble_bordered(const BorderedSystem& sys);

/// Bordered solve that tolerates a singular core (folds, branch points,
/// exactly critical states): tries the Schur route with a fresh core
/// factorization and falls back to a sparse LU of the assembled matrix.
/// `core_solves` is left empty on the fallback path.
BorderedSolution solve_bordered_robust(const BorderedSystem& sys, const Vec& rhs_top,
                                       const Vec& rhs_bottom);

}  // namespace bifkit
