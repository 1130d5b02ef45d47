#include "bifkit/stability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "bifkit/error.hpp"
#include "bifkit/linalg.hpp"

namespace bifkit {

namespace {

using Op = std::function<CVec(const CVec&)>;

struct Ritz {
  complex theta;
  CVec x;
};

double pencil_residual(const SparseMatrix& J, const SparseMatrix& M, complex lambda, const CVec& x) {
  const CVec r = J.cast<complex>() * x + lambda * (M.cast<complex>() * x);
  return r.norm() / x.norm();
}

CVec random_unit(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  CVec v(n);
  for (Index i = 0; i < n; ++i) v[i] = complex(d(rng), d(rng));
  return v / v.norm();
}

// Fixes the phase so the largest entry is real and positive, unit 2-norm.
CVec canonical(const CVec& x) {
  Index imax = 0;
  x.cwiseAbs().maxCoeff(&imax);
  const complex a = x[imax];
  CVec y = x * (std::abs(a) / a);
  return y / y.norm();
}

std::vector<Index> order_by_magnitude(const CVec& theta) {
  std::vector<Index> idx(static_cast<std::size_t>(theta.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Index a, Index b) { return std::abs(theta[a]) > std::abs(theta[b]); });
  return idx;
}

// Largest-magnitude eigenvalues of `op` by Arnoldi with Krylov-Schur style
// restarts: the kept subspace is spanned by the wanted Ritz vectors.
// `accurate(theta, x)` decides convergence of each wanted pair.
std::vector<Ritz> krylov_schur(const Op& op, Index n, Index nev, Index m, int max_restarts,
                               unsigned seed, const std::function<double(complex, const CVec&)>& residual,
                               double tol) {
  m = std::min(m, n);
  nev = std::min(nev, m);
  std::mt19937_64 rng(seed);
  CMat V = CMat::Zero(n, m + 1);
  CMat H = CMat::Zero(m + 1, m);
  V.col(0) = random_unit(n, rng);
  Index k = 0;
  std::vector<Ritz> best;

  for (int restart = 0; restart <= max_restarts; ++restart) {
    for (Index j = k; j < m; ++j) {
      CVec w = op(V.col(j));
      const double wnorm0 = w.norm();
      for (int pass = 0; pass < 2; ++pass) {
        const CVec c = V.leftCols(j + 1).adjoint() * w;
        w -= V.leftCols(j + 1) * c;
        H.col(j).head(j + 1) += c;
      }
      double h = w.norm();
      if (h <= 1e-13 * std::max(wnorm0, 1e-300)) {
        // Invariant subspace found; continue with a fresh orthogonal direction.
        H(j + 1, j) = 0.0;
        if (j + 1 < n) {
          CVec r = random_unit(n, rng);
          for (int pass = 0; pass < 2; ++pass) r -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * r);
          V.col(j + 1) = r / r.norm();
        } else {
          V.col(j + 1).setZero();
        }
        continue;
      }
      H(j + 1, j) = h;
      V.col(j + 1) = w / h;
    }

    const CMat Hm = H.topLeftCorner(m, m);
    Eigen::ComplexEigenSolver<CMat> es(Hm);
    const CVec theta = es.eigenvalues();
    const std::vector<Index> idx = order_by_magnitude(theta);

    best.clear();
    bool all_ok = true;
    for (Index i = 0; i < nev; ++i) {
      CVec y = es.eigenvectors().col(idx[static_cast<std::size_t>(i)]);
      y /= y.norm();
      const CVec x = V.leftCols(m) * y;
      const complex th = theta[idx[static_cast<std::size_t>(i)]];
      best.push_back({th, x});
      if (!(residual(th, x) < tol)) all_ok = false;
    }
    if (all_ok || restart == max_restarts) break;

    // Keep the wanted Ritz vectors plus a buffer of the next ones.
    const Index keep = std::min<Index>(m - 1, nev + (m - nev) / 2);
    CMat Y(m, keep);
    for (Index i = 0; i < keep; ++i) Y.col(i) = es.eigenvectors().col(idx[static_cast<std::size_t>(i)]);
    Eigen::HouseholderQR<CMat> qr(Y);
    const CMat Q = qr.householderQ() * CMat::Identity(m, keep);

    CMat Vn = CMat::Zero(n, m + 1);
    Vn.leftCols(keep) = V.leftCols(m) * Q;
    Vn.col(keep) = V.col(m);
    CMat Hn = CMat::Zero(m + 1, m);
    Hn.topLeftCorner(keep, keep) = Q.adjoint() * Hm * Q;
    Hn.row(keep).head(keep) = H(m, m - 1) * Q.row(m - 1);
    V = std::move(Vn);
    H = std::move(Hn);
    k = keep;
  }
  return best;
}

std::vector<Ritz> dense_spectrum(const Op& op, Index n) {
  CMat A(n, n);
  for (Index j = 0; j < n; ++j) A.col(j) = op(CVec::Unit(n, j));
  Eigen::ComplexEigenSolver<CMat> es(A);
  const CVec theta = es.eigenvalues();
  const double tmax = theta.cwiseAbs().maxCoeff();
  std::vector<Ritz> out;
  for (Index i : order_by_magnitude(theta)) {
    // theta ~ 0 are the infinite eigenvalues of a singular mass.
    if (std::abs(theta[i]) <= 1e-12 * tmax) continue;
    out.push_back({theta[i], es.eigenvectors().col(i)});
  }
  return out;
}

}  // namespace

std::vector<EigenPair> eigs_pencil(const SparseMatrix& J, const SparseMatrix& M,
                                   const EigsSettings& settings) {
  const Index n = J.rows();
  if (J.cols() != n || M.rows() != n || M.cols() != n) {
    throw Error(ErrorKind::dimension_mismatch, "eigs: J and M must be square and equal size");
  }
  if (settings.nev < 1) throw Error(ErrorKind::invalid_configuration, "eigs: nev must be positive");
  const complex s = settings.shift;

  ComplexFactorization lu;
  try {
    lu = ComplexFactorization(J, M, s);
  } catch (const SingularMatrixError& e) {
    throw Error(ErrorKind::singular_shift, "shifted operator is singular at the requested shift");
  }
  const SparseMatrix Mt = M.transpose();
  const Op direct = [&](const CVec& x) { return lu.solve(CVec(M.cast<complex>() * x)); };
  const Op adjoint = [&](const CVec& x) { return lu.solve(CVec(Mt.cast<complex>() * x), true); };
  const SparseMatrix Jt = J.transpose();

  const Index nev = std::min(settings.nev, n);
  const bool dense = n <= settings.dense_threshold;
  const Index m = settings.krylov_dim > 0 ? settings.krylov_dim : std::max<Index>(2 * nev + 10, 30);
  // Tighter than the acceptance tolerance so that the final check has margin.
  const double inner_tol = 0.01 * settings.tol;

  auto run = [&](const Op& op, const SparseMatrix& A, const SparseMatrix& B, complex shift) {
    if (dense) {
      auto all = dense_spectrum(op, n);
      if (static_cast<Index>(all.size()) > nev) all.resize(static_cast<std::size_t>(nev));
      return all;
    }
    auto res = [&](complex th, const CVec& x) { return pencil_residual(A, B, shift - 1.0 / th, x); };
    return krylov_schur(op, n, nev, m, settings.max_restarts, settings.seed, res, inner_tol);
  };

  const std::vector<Ritz> ritz = run(direct, J, M, s);
  std::vector<EigenPair> out;
  for (const Ritz& r : ritz) {
    EigenPair e;
    e.lambda = s - 1.0 / r.theta;
    e.direct_mode = canonical(r.x);
    e.residual_norm = pencil_residual(J, M, e.lambda, e.direct_mode);
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [&](const EigenPair& a, const EigenPair& b) {
    return std::abs(a.lambda - s) < std::abs(b.lambda - s);
  });

  if (settings.want_adjoint) {
    // Left eigenvectors: pencil (J^T, M^T) at conj(lambda), same factorization.
    const std::vector<Ritz> left = run(adjoint, Jt, Mt, std::conj(s));
    std::vector<bool> used(left.size(), false);
    for (EigenPair& e : out) {
      std::size_t bestj = left.size();
      double bestd = 0.0;
      for (std::size_t j = 0; j < left.size(); ++j) {
        if (used[j]) continue;
        const complex mu = std::conj(s) - 1.0 / left[j].theta;
        const double d = std::abs(std::conj(mu) - e.lambda);
        if (bestj == left.size() || d < bestd) {
          bestd = d;
          bestj = j;
        }
      }
      if (bestj == left.size()) continue;
      used[bestj] = true;
      CVec y = left[bestj].x;
      const complex c = y.dot(M.cast<complex>() * e.direct_mode);
      if (std::abs(c) > 1e-12 * y.norm()) {
        y /= std::conj(c);
      } else {
        y /= y.norm();
      }
      e.adjoint_mode = std::move(y);
    }
  }
  return out;
}

std::vector<EigenPair> eigs(const Problem& pb, const Vec& q, const Parameters& p,
                            const EigsSettings& settings) {
  check_dimensions(pb, q, p);
  return eigs_pencil(pb.jacobian(q, p), pb.mass_matrix(q, p), settings);
}

std::vector<EigenPair> eigs(const Problem& pb, const Vec& q, const Parameters& p, complex shift,
                            Index nev, bool want_adjoint) {
  EigsSettings s;
  s.shift = shift;
  s.nev = nev;
  s.want_adjoint = want_adjoint;
  return eigs(pb, q, p, s);
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::marginal: return "marginal";
  }
  return "?";
}

Stability classify_stability(const std::vector<EigenPair>& pairs, double sigma_tol) {
  if (pairs.empty()) throw Error(ErrorKind::invalid_configuration, "classify_stability: no eigenpairs");
  bool marginal = false;
  for (const auto& e : pairs) {
    if (e.lambda.real() > sigma_tol) return Stability::unstable;
    if (std::abs(e.lambda.real()) <= sigma_tol) marginal = true;
  }
  return marginal ? Stability::marginal : Stability::stable;
}

}  // namespace bifkit
