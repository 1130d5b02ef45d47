#include "bifkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SparseLU>

#include "bifkit/error.hpp"

namespace bifkit {

namespace {

// Exposes the supernodal storage, where SparseLU keeps the diagonal of U.
class PivotLU : public Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> {
 public:
  // Returns the factored column with the smallest |U_jj| and that value.
  std::pair<Index, double> smallest_pivot() const {
    Index where = -1;
    double smallest = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < cols(); ++j) {
      double d = 0.0;
      for (SCMatrix::InnerIterator it(m_Lstore, j); it; ++it) {
        if (it.index() == j) {
          d = std::abs(it.value());
          break;
        }
      }
      if (d < smallest) {
        smallest = d;
        where = j;
      }
    }
    return {where, smallest};
  }
};

long parse_trailing_int(const std::string& msg) {
  auto pos = msg.find_last_not_of("0123456789");
  if (pos == std::string::npos || pos + 1 >= msg.size()) return -1;
  return std::stol(msg.substr(pos + 1));
}

}  // namespace

struct Factorization::Impl {
  PivotLU lu;
  Index n = 0;
  int det_sign = 1;
  double min_rel_pivot = 0.0;
};

Factorization::Factorization(const SparseMatrix& A) {
  if (A.rows() != A.cols()) {
    throw Error(ErrorKind::dimension_mismatch, "factor: matrix is not square");
  }
  auto impl = std::make_shared<Impl>();
  impl->n = A.rows();
  if (impl->n == 0) {
    impl_ = impl;
    return;
  }
  SparseMatrix Ac = A;
  Ac.makeCompressed();

  Vec row_norm2 = Vec::Zero(A.rows());
  for (Index j = 0; j < Ac.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(Ac, j); it; ++it) row_norm2[it.row()] += it.value() * it.value();
  }
  const double scale = std::sqrt(row_norm2.maxCoeff());
  if (scale == 0.0) throw SingularMatrixError(0, "factor: zero matrix");

  impl->lu.analyzePattern(Ac);
  impl->lu.factorize(Ac);
  if (impl->lu.info() != Eigen::Success) {
    const long col = parse_trailing_int(impl->lu.lastErrorMessage());
    throw SingularMatrixError(col, "factor: structurally or numerically singular (pivot " +
                                       std::to_string(col) + ")");
  }
  const auto [where, smallest] = impl->lu.smallest_pivot();
  impl->min_rel_pivot = smallest / scale;
  if (smallest < 1e-14 * scale || !std::isfinite(smallest)) {
    const long col = where < 0 ? -1 : static_cast<long>(impl->lu.colsPermutation().indices()[where]);
    throw SingularMatrixError(col, "factor: pivot below threshold at column " + std::to_string(col));
  }
  impl->det_sign = impl->lu.signDeterminant() < 0 ? -1 : 1;
  impl_ = impl;
}

Index Factorization::size() const { return impl_ ? impl_->n : 0; }

int Factorization::determinant_sign() const { return impl_ ? impl_->det_sign : 1; }

double Factorization::min_relative_pivot() const { return impl_ ? impl_->min_rel_pivot : 0.0; }

Mat Factorization::solve(const Mat& B, bool transpose) const {
  if (!impl_) throw Error(ErrorKind::invalid_configuration, "solve: empty factorization");
  if (B.rows() != impl_->n) {
    throw Error(ErrorKind::dimension_mismatch, "solve: right-hand side has " +
                                                   std::to_string(B.rows()) + " rows, expected " +
                                                   std::to_string(impl_->n));
  }
  if (impl_->n == 0) return B;
  // transpose() only builds a view; the factors themselves are not touched.
  auto& lu = const_cast<PivotLU&>(impl_->lu);
  Mat X = transpose ? Mat(lu.transpose().solve(B)) : Mat(lu.solve(B));
  return X;
}

Vec Factorization::solve(const Vec& b, bool transpose) const {
  return solve(Mat(b), transpose).col(0);
}

CVec Factorization::solve(const CVec& b, bool transpose) const {
  Mat B(b.size(), 2);
  B.col(0) = b.real();
  B.col(1) = b.imag();
  const Mat X = solve(B, transpose);
  CVec x(X.rows());
  x.real() = X.col(0);
  x.imag() = X.col(1);
  return x;
}

Factorization factor(const SparseMatrix& A) { return Factorization(A); }

Vec solve(const Factorization& f, const Vec& b, bool transpose) { return f.solve(b, transpose); }

ComplexFactorization::ComplexFactorization(const SparseMatrix& A, const SparseMatrix& B, complex s)
    : n_(A.rows()) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || B.cols() != A.cols()) {
    throw Error(ErrorKind::dimension_mismatch, "complex factor: A and B must be square and equal size");
  }
  const SparseMatrix C = A + s.real() * B;
  if (s.imag() == 0.0) {
    real_shift_ = true;
    lu_ = Factorization(C);
    return;
  }
  real_shift_ = false;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(2 * C.nonZeros() + 2 * B.nonZeros()));
  for (Index j = 0; j < C.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(C, j); it; ++it) {
      t.emplace_back(it.row(), it.col(), it.value());
      t.emplace_back(it.row() + n_, it.col() + n_, it.value());
    }
  }
  for (Index j = 0; j < B.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(B, j); it; ++it) {
      t.emplace_back(it.row(), it.col() + n_, -s.imag() * it.value());
      t.emplace_back(it.row() + n_, it.col(), s.imag() * it.value());
    }
  }
  SparseMatrix D(2 * n_, 2 * n_);
  D.setFromTriplets(t.begin(), t.end());
  lu_ = Factorization(D);
}

CVec ComplexFactorization::solve(const CVec& b, bool adjoint) const {
  if (b.size() != n_) throw Error(ErrorKind::dimension_mismatch, "complex solve: wrong size");
  if (real_shift_) return lu_.solve(b, adjoint);
  // The transpose of the doubled matrix represents the adjoint operator.
  Vec rhs(2 * n_);
  rhs << b.real(), b.imag();
  const Vec x = lu_.solve(rhs, adjoint);
  CVec out(n_);
  out.real() = x.head(n_);
  out.imag() = x.tail(n_);
  return out;
}

namespace {

void check_bordered(const BorderedSystem& sys, const Vec& rhs_top, const Vec& rhs_bottom) {
  const Index n = sys.n(), k = sys.k();
  if (sys.core.cols() != n || sys.border_cols.rows() != n || sys.border_cols.cols() != k ||
      sys.border_rows.rows() != k || sys.border_rows.cols() != n || sys.corner.cols() != k ||
      rhs_top.size() != n || rhs_bottom.size() != k) {
    throw Error(ErrorKind::dimension_mismatch, "bordered system dimensions are inconsistent");
  }
}

}  // namespace

BorderedSolution solve_bordered(const BorderedSystem& sys, const Vec& rhs_top,
                                const Vec& rhs_bottom, const Factorization& core_factorization) {
  check_bordered(sys, rhs_top, rhs_bottom);
  if (core_factorization.size() != sys.n()) {
    throw Error(ErrorKind::dimension_mismatch, "bordered solve: factorization size differs from core");
  }
  BorderedSolution out;
  out.core_solves = core_factorization.solve(sys.border_cols);
  const Vec z = core_factorization.solve(rhs_top);
  const Mat S = sys.corner - sys.border_rows * out.core_solves;

  const double scale = sys.corner.norm() + sys.border_rows.norm() * out.core_solves.norm();
  Eigen::FullPivLU<Mat> slu(S);
  const double max_pivot = slu.maxPivot();
  if (!(max_pivot > 1e-14 * scale) || !S.allFinite()) {
    throw Error(ErrorKind::bordered_singular, "Schur complement vanishes");
  }
  slu.setThreshold(1e-13);
  if (!slu.isInvertible()) throw Error(ErrorKind::bordered_singular, "Schur complement is singular");

  out.bottom = slu.solve(rhs_bottom - sys.border_rows * z);
  out.top = z - out.core_solves * out.bottom;
  return out;
}

SparseMatrix assemble_bordered(const BorderedSystem& sys) {
  const Index n = sys.n(), k = sys.k();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(sys.core.nonZeros() + 2 * n * k + k * k));
  for (Index j = 0; j < sys.core.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(sys.core, j); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  for (Index c = 0; c < k; ++c) {
    for (Index i = 0; i < n; ++i) {
      if (sys.border_cols(i, c) != 0.0) t.emplace_back(i, n + c, sys.border_cols(i, c));
      if (sys.border_rows(c, i) != 0.0) t.emplace_back(n + c, i, sys.border_rows(c, i));
    }
    for (Index r = 0; r < k; ++r) {
      if (sys.corner(r, c) != 0.0) t.emplace_back(n + r, n + c, sys.corner(r, c));
    }
  }
  SparseMatrix A(n + k, n + k);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

BorderedSolution solve_bordered_robust(const BorderedSystem& sys, const Vec& rhs_top,
                                       const Vec& rhs_bottom) {
  check_bordered(sys, rhs_top, rhs_bottom);
  try {
    return solve_bordered(sys, rhs_top, rhs_bottom, Factorization(sys.core));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::singular_matrix && e.kind() != ErrorKind::bordered_singular) throw;
  }
  Factorization full;
  try {
    full = Factorization(assemble_bordered(sys));
  } catch (const SingularMatrixError&) {
    throw Error(ErrorKind::bordered_singular, "bordered matrix is singular");
  }
  Vec rhs(sys.n() + sys.k());
  rhs << rhs_top, rhs_bottom;
  const Vec x = full.solve(rhs);
  BorderedSolution out;
  out.top = x.head(sys.n());
  out.bottom = x.tail(sys.k());
  return out;
}

}  // namespace bifkit
