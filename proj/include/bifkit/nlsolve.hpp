#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bifkit/error.hpp"
#include "bifkit/problem.hpp"

namespace bifkit {

enum class Damping { none, backtracking };

struct NewtonSettings {
  double abs_tol = 1e-10;
  double rel_tol = 1e-12;
  int max_iterations = 25;
  Damping damping = Damping::none;
  double shrink = 0.5;        // backtracking factor
  int max_halvings = 8;

  void validate() const;
};

struct DeflationSettings {
  double order_p = 2.0;
  double shift_a = 1.0;
  std::vector<Vec> known_solutions;

  void validate() const;
};

struct NewtonResult {
  Vec q;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  std::vector<double> residual_history;  // ||R|| at q0, q1, ...
  std::vector<Vec> iterates;             // q0, q1, ...
  std::string message;                   // why it stopped when not converged
};

/// Thrown when the Jacobian cannot be factored; carries the offending iterate.
class SingularJacobianError : public Error {
 public:
  SingularJacobianError(Vec iterate, const std::string& what)
      : Error(ErrorKind::singular_jacobian, what), iterate_(std::move(iterate)) {}
  [[nodiscard]] const Vec& iterate() const { return iterate_; }

 private:
  Vec iterate_;
};

/// Undeflated Newton: J dq = R, q <- q - b_eff(dq). A non-converged result is
/// the divergence report. A singular Jacobian at q0 throws
/// SingularJacobianError; one met at a later iterate ends as divergence.
NewtonResult newton_solve(const Problem& pb, const Vec& q0, const Parameters& p,
                          const NewtonSettings& settings = {});

/// Scalar factor of the deflated step, a product over known solutions.
double deflation_scale(const Vec& q, const Vec& dq, const DeflationSettings& deflation);

NewtonResult deflated_newton_solve(const Problem& pb, const Vec& q0, const Parameters& p,
                                   const NewtonSettings& newton, const DeflationSettings& deflation);

/// Newton on an arbitrary square system. `step(x, r)` returns the undamped
/// correction dx solving J(x) dx = r; `scale(x, dx)` may rescale it (deflation).
struct NewtonCallbacks {
  std::function<Vec(const Vec&)> residual;
  std::function<Vec(const Vec&, const Vec&)> step;
  std::function<double(const Vec&, const Vec&)> scale;
};
NewtonResult newton_iterate(const NewtonCallbacks& cb, const Vec& x0, const NewtonSettings& settings);

}  // namespace bifkit
