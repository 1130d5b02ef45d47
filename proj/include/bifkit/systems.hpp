#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bifkit/problem.hpp"

namespace bifkit {

/// Brusselator reaction-diffusion on [0, 1], second-order central differences,
/// Dirichlet (X, Y) = (A, B/A) at both ends. Boundary nodes are eliminated, so
/// the unknowns are [X_1..X_m, Y_1..Y_m] with m = grid_points - 2.
/// Parameters: [A, B, D_X, D_Y, L]; active parameter L.
class Brusselator1D final : public Problem {
 public:
  explicit Brusselator1D(int grid_points);

  [[nodiscard]] std::string name() const override { return "brusselator_1d"; }
  [[nodiscard]] Index dim() const override { return 2 * m_; }
  [[nodiscard]] Parameters default_parameters() const override;
  [[nodiscard]] int polynomial_degree() const override { return 3; }

  [[nodiscard]] int grid_points() const { return m_ + 2; }
  /// Uniform state (A, B/A) at every interior node.
  [[nodiscard]] Vec base_state(const Parameters& p) const;

  [[nodiscard]] Vec residual(const Vec& q, const Parameters& p) const override;
  [[nodiscard]] SparseMatrix jacobian(const Vec& q, const Parameters& p) const override;
  [[nodiscard]] Vec param_gradient(const Vec& q, const Parameters& p, Index j) const override;
  [[nodiscard]] Vec hessian_apply(const Vec& q, const Parameters& p, const Vec& u,
                                  const Vec& v) const override;
  [[nodiscard]] Vec third_apply(const Vec& q, const Parameters& p, const Vec& u, const Vec& v,
                                const Vec& w) const override;
  [[nodiscard]] Vec mixed_param_jacobian_apply(const Vec& q, const Parameters& p, Index j,
                                               const Vec& v) const override;
  [[nodiscard]] SparseMatrix hessian_matrix(const Vec& q, const Parameters& p,
                                            const Vec& u) const override;
  [[nodiscard]] SparseMatrix third_matrix(const Vec& q, const Parameters& p, const Vec& u,
                                          const Vec& w) const override;

 private:
  // Second difference with zero Dirichlet data.
  [[nodiscard]] Vec laplacian0(const Eigen::Ref<const Vec>& x) const;

  Index m_;
  double h_;
};

/// Diffusion-free Brusselator: a 2-D ODE with parameters [A, B].
class Brusselator0D final : public Problem {
 public:
  [[nodiscard]] std::string name() const override { return "brusselator_0d"; }
  [[nodiscard]] Index dim() const override { return 2; }
  [[nodiscard]] Parameters default_parameters() const override;
  [[nodiscard]] int polynomial_degree() const override { return 3; }

  [[nodiscard]] Vec equilibrium(const Parameters& p) const;

  [[nodiscard]] Vec residual(const Vec& q, const Parameters& p) const override;
  [[nodiscard]] SparseMatrix jacobian(const Vec& q, const Parameters& p) const override;
  [[nodiscard]] Vec param_gradient(const Vec& q, const Parameters& p, Index j) const override;
  [[nodiscard]] Vec hessian_apply(const Vec& q, const Parameters& p, const Vec& u,
                                  const Vec& v) const override;
  [[nodiscard]] Vec third_apply(const Vec& q, const Parameters& p, const Vec& u, const Vec& v,
                                const Vec& w) const override;
  [[nodiscard]] Vec mixed_param_jacobian_apply(const Vec& q, const Parameters& p, Index j,
                                               const Vec& v) const override;
};

/// Scalar normal-form systems with M = 1.
enum class ScalarKind { fold, pitchfork, cusp };

/// fold:      R = q^2 + a1
/// pitchfork: R = q^3 - a1 q
/// cusp:      R = q^3 + a2 q + a1
class ScalarSystem final : public Problem {
 public:
  explicit ScalarSystem(ScalarKind kind) : kind_(kind) {}

  [[nodiscard]] std::string name() const override;
  [[nodiscard]] Index dim() const override { return 1; }
  [[nodiscard]] Parameters default_parameters() const override;
  [[nodiscard]] int polynomial_degree() const override { return kind_ == ScalarKind::fold ? 2 : 3; }

  [[nodiscard]] Vec residual(const Vec& q, const Parameters& p) const override;
  [[nodiscard]] SparseMatrix jacobian(const Vec& q, const Parameters& p) const override;
  [[nodiscard]] Vec param_gradient(const Vec& q, const Parameters& p, Index j) const override;
  [[nodiscard]] Vec hessian_apply(const Vec& q, const Parameters& p, const Vec& u,
                                  const Vec& v) const override;
  [[nodiscard]] Vec third_apply(const Vec& q, const Parameters& p, const Vec& u, const Vec& v,
                                const Vec& w) const override;
  [[nodiscard]] Vec mixed_param_jacobian_apply(const Vec& q, const Parameters& p, Index j,
                                               const Vec& v) const override;

 private:
  ScalarKind kind_;
};

/// Affine system R = K q - c - alpha d with mass matrix M (identity by default).
/// Single parameter "alpha".
class LinearSystem final : public Problem {
 public:
  LinearSystem(SparseMatrix K, Vec c, Vec d, SparseMatrix M = {});

  [[nodiscard]] std::string name() const override { return "linear"; }
  [[nodiscard]] Index dim() const override { return K_.rows(); }
  [[nodiscard]] Parameters default_parameters() const override;
  [[nodiscard]] int polynomial_degree() const override { return 1; }

  [[nodiscard]] Vec residual(const Vec& q, const Parameters& p) const override;
  [[nodiscard]] SparseMatrix jacobian(const Vec& q, const Parameters& p) const override;
  [[nodiscard]] Vec param_gradient(const Vec& q, const Parameters& p, Index j) const override;
  [[nodiscard]] Vec hessian_apply(const Vec& q, const Parameters& p, const Vec& u,
                                  const Vec& v) const override;
  [[nodiscard]] Vec third_apply(const Vec& q, const Parameters& p, const Vec& u, const Vec& v,
                                const Vec& w) const override;
  [[nodiscard]] Vec mixed_param_jacobian_apply(const Vec& q, const Parameters& p, Index j,
                                               const Vec& v) const override;
  [[nodiscard]] SparseMatrix mass_matrix(const Vec& q, const Parameters& p) const override;

 private:
  SparseMatrix K_;
  Vec c_;
  Vec d_;
  SparseMatrix M_;
};

std::shared_ptr<Brusselator1D> brusselator_1d(int grid_points);
std::shared_ptr<Brusselator0D> brusselator_0d();
std::shared_ptr<ScalarSystem> scalar_fold();
std::shared_ptr<ScalarSystem> scalar_pitchfork();
std::shared_ptr<ScalarSystem> scalar_cusp();

/// Registry lookup used by the CLI. Recognized options: "grid_points" for
/// brusselator_1d (default 201).
ProblemPtr make_problem(const std::string& name, const std::map<std::string, double>& options = {});
std::vector<std::string> registered_problems();

/// A natural starting state for a registered problem (its known equilibrium,
/// or zero for the scalar systems).
Vec initial_state(const Problem& pb, const Parameters& p);

}  // namespace bifkit
