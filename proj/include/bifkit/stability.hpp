#pragma once

#include <optional>
#include <vector>

#include "bifkit/problem.hpp"

namespace bifkit {

/// Eigenpair of (lambda M + J) q = 0, i.e. a growth rate of M q' = -R.
struct EigenPair {
  complex lambda;
  CVec direct_mode;                  // unit 2-norm
  std::optional<CVec> adjoint_mode;  // scaled so <adjoint, M direct> = 1
  double residual_norm = 0.0;        // ||(lambda M + J) q|| / ||q||
};

struct EigsSettings {
  complex shift{0.0, 0.0};
  Index nev = 6;
  bool want_adjoint = false;
  /// Krylov subspace size; 0 selects max(2 nev + 10, 30).
  Index krylov_dim = 0;
  int max_restarts = 50;
  /// Problems up to this size use the dense solver.
  Index dense_threshold = 200;
  /// Required relative pencil residual for each returned pair.
  double tol = 1e-8;
  unsigned seed = 1;
};

/// Shift-invert eigenvalues nearest settings.shift of the pencil (J, M),
/// sorted by |lambda - shift|. A singular shifted operator -> singular_shift.
std::vector<EigenPair> eigs_pencil(const SparseMatrix& J, const SparseMatrix& M,
                                   const EigsSettings& settings);

std::vector<EigenPair> eigs(const Problem& pb, const Vec& q, const Parameters& p,
                            const EigsSettings& settings);
std::vector<EigenPair> eigs(const Problem& pb, const Vec& q, const Parameters& p, complex shift,
                            Index nev, bool want_adjoint = false);

enum class Stability { stable, unstable, marginal };
const char* to_string(Stability s);

Stability classify_stability(const std::vector<EigenPair>& pairs, double sigma_tol = 1e-8);

}  // namespace bifkit
