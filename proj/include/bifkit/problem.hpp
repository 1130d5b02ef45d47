#pragma once

#include <memory>
#include <string>

#include "bifkit/types.hpp"

namespace bifkit {

/// A finite-dimensional system  M(q;a) dq/dt + R(q;a) = 0  together with the
/// derivative callbacks every solver in the library relies on.
///
/// Implementations must be pure: no callback may mutate hidden state, so one
/// instance can be shared read-only between concurrent solves.
///
/// Multilinear callbacks (hessian_apply, third_apply, ...) are real; complex
/// arguments are handled by the free functions below through multilinearity.
class Problem {
 public:
  virtual ~Problem() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Index dim() const = 0;
  [[nodiscard]] virtual Parameters default_parameters() const = 0;

  /// Total polynomial degree of R (and of M(q) dq/dt) in q; -1 if not polynomial.
  /// Harmonic balance requires a value in [1, 3].
  [[nodiscard]] virtual int polynomial_degree() const = 0;
  [[nodiscard]] bool hb_capable() const {
    const int d = polynomial_degree();
    return d >= 1 && d <= 3;
  }
  /// True when M does not depend on q (it may still depend on the parameters).
  [[nodiscard]] virtual bool constant_mass() const { return true; }

  [[nodiscard]] virtual Vec residual(const Vec& q, const Parameters& p) const = 0;
  [[nodiscard]] virtual SparseMatrix jacobian(const Vec& q, const Parameters& p) const = 0;
  [[nodiscard]] virtual Vec param_gradient(const Vec& q, const Parameters& p, Index j) const = 0;
  [[nodiscard]] virtual Vec hessian_apply(const Vec& q, const Parameters& p, const Vec& u,
                                          const Vec& v) const = 0;
  [[nodiscard]] virtual Vec third_apply(const Vec& q, const Parameters& p, const Vec& u, const Vec& v,
                                        const Vec& w) const = 0;
  [[nodiscard]] virtual Vec mixed_param_jacobian_apply(const Vec& q, const Parameters& p, Index j,
                                                       const Vec& v) const = 0;

  // Mass operator. Defaults describe M = I.
  [[nodiscard]] virtual SparseMatrix mass_matrix(const Vec& q, const Parameters& p) const;
  [[nodiscard]] virtual Vec mass_apply(const Vec& q, const Parameters& p, const Vec& v) const;
  [[nodiscard]] virtual Vec mass_jacobian_apply(const Vec& q, const Parameters& p, const Vec& u,
                                                const Vec& v) const;
  [[nodiscard]] virtual Vec mass_second_apply(const Vec& q, const Parameters& p, const Vec& u,
                                              const Vec& v, const Vec& w) const;
  [[nodiscard]] virtual Vec mass_param_gradient_apply(const Vec& q, const Parameters& p, Index j,
                                                      const Vec& v) const;

  /// Sparse matrix of v -> d_qq R(u, v). The default differences jacobian(),
  /// which is exact (to rounding) whenever R is at most cubic in q.
  [[nodiscard]] virtual SparseMatrix hessian_matrix(const Vec& q, const Parameters& p,
                                                    const Vec& u) const;
  /// Sparse matrix of v -> d_qqq R(u, w, v); same default strategy.
  [[nodiscard]] virtual SparseMatrix third_matrix(const Vec& q, const Parameters& p, const Vec& u,
                                                  const Vec& w) const;
};

using ProblemPtr = std::shared_ptr<const Problem>;

// Complex-argument forms built from the real callbacks.
CVec hessian_apply(const Problem& pb, const Vec& q, const Parameters& p, const CVec& u,
                   const CVec& v);
CVec third_apply(const Problem& pb, const Vec& q, const Parameters& p, const CVec& u,
                 const CVec& v, const CVec& w);
CVec mixed_param_jacobian_apply(const Problem& pb, const Vec& q, const Parameters& p, Index j,
                                const CVec& v);
CVec mass_apply(const Problem& pb, const Vec& q, const Parameters& p, const CVec& v);
CVec mass_jacobian_apply(const Problem& pb, const Vec& q, const Parameters& p, const CVec& u,
                         const CVec& v);
CVec mass_param_gradient_apply(const Problem& pb, const Vec& q, const Parameters& p, Index j,
                               const CVec& v);

/// Throws dimension_mismatch unless q has the problem's dimension and
/// p has as many entries as the problem's default parameters.
void check_dimensions(const Problem& pb, const Vec& q, const Parameters& p);

}  // namespace bifkit
