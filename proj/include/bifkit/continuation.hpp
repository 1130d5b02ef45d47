#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bifkit/linalg.hpp"
#include "bifkit/nlsolve.hpp"
#include "bifkit/problem.hpp"

namespace bifkit {

// ---------------------------------------------------------------------------
// Generic Moore-Penrose continuation of F(x, mu) = 0, x = (x_core, x_extra).
// The Jacobian is supplied in bordered form so corrector solves only need
// factorizations of the sparse core.

struct Linearization {
  SparseMatrix core;  // n x n
  Mat cols;           // n x k
  Mat rows;           // k x n
  Mat corner;         // k x k
  Vec dmu;            // dF/dmu, n + k
};

class AugmentedSystem {
 public:
  virtual ~AugmentedSystem() = default;
  [[nodiscard]] virtual Index core_dim() const = 0;
  [[nodiscard]] virtual Index extra_dim() const { return 0; }
  [[nodiscard]] Index dim() const { return core_dim() + extra_dim(); }
  [[nodiscard]] virtual Vec residual(const Vec& x, double mu) const = 0;
  [[nodiscard]] virtual Linearization linearize(const Vec& x, double mu) const = 0;
  /// Called for every accepted point (e.g. to refresh bordering vectors).
  virtual void accept(const Vec& /*x*/, double /*mu*/) {}
};

/// Unit tangent (x, mu) of the solution curve.
struct UnitTangent {
  Vec x;
  double mu = 0.0;

  [[nodiscard]] double dot(const UnitTangent& o) const { return x.dot(o.x) + mu * o.mu; }
};

/// Null vector of [F_x, F_mu] scaled to a unit vector, computed from core
/// solves (y_mu = -1 before scaling). If the core or its Schur complement is
/// singular, `previous` is used to border the assembled system instead;
/// without it the call throws tangent_at_singularity.
UnitTangent augmented_tangent(const Linearization& lin, const UnitTangent* previous = nullptr);

struct CorrectorResult {
  bool converged = false;
  Vec x;
  double mu = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
  std::string message;
};

/// Moore-Penrose corrector: each iteration solves
/// [[F_x, F_mu], [t_x^T, t_mu]] d = [F; 0] through the bordered core.
CorrectorResult moore_penrose_correct(const AugmentedSystem& sys, const Vec& x0, double mu0,
                                      const UnitTangent& tangent, const NewtonSettings& settings);

struct StepControl {
  double h0 = 0.01;  // sign selects the direction of the continuation parameter
  double h_min = 1e-6;
  double h_max = 0.1;
  int target_iterations = 3;
  double growth_cap = 2.0;
  double shrink_cap = 0.5;

  void validate() const;
};

/// h * 2^((target - its)/2), ratio limited to [shrink_cap, growth_cap], then
/// |h| clamped to [h_min, h_max]. Sign preserved.
double adapt_step(double h, int corrector_iterations, const StepControl& control);

enum class TraceStatus {
  max_points,       // requested number of points produced
  left_bounds,      // next point would leave the parameter window
  step_too_small,   // corrector failed at h_min
  stopped,          // an accept hook asked to stop
  failed,           // unrecoverable error (message says why)
};
const char* to_string(TraceStatus s);

struct CurvePoint {
  Vec x;
  double mu = 0.0;
  UnitTangent tangent;
  double step = 0.0;     // |h| of the step that produced this point (0 at the start)
  int iterations = 0;    // corrector iterations for this point
};

struct EngineSettings {
  StepControl control;
  NewtonSettings corrector;
  Index max_points = 100;
  double mu_min = -std::numeric_limits<double>::infinity();
  double mu_max = std::numeric_limits<double>::infinity();
};

struct CurveResult {
  std::vector<CurvePoint> points;
  TraceStatus status = TraceStatus::max_points;
  std::string message;
};

/// Returns false to stop after accepting `current`.
using AcceptHook = std::function<bool(const CurvePoint& previous, const CurvePoint& current)>;

/// Traces from a converged start. If start.tangent is empty it is computed and
/// oriented so that sign(mu-component) = sign(h0).
CurveResult trace_curve(AugmentedSystem& sys, CurvePoint start, const EngineSettings& settings,
                        const AcceptHook& hook = {});

// ---------------------------------------------------------------------------
// Steady-state branches of R(q; alpha) = 0 in the active parameter.

struct Tangent {
  Vec y_q;
  double y_alpha = -1.0;

  [[nodiscard]] double norm() const { return std::sqrt(y_q.squaredNorm() + y_alpha * y_alpha); }
  [[nodiscard]] bool empty() const { return y_q.size() == 0; }
};

struct BranchPoint {
  Vec q;
  Parameters alpha;
  Tangent tangent;
  double step_used = 0.0;
  int corrector_iterations = 0;
  std::vector<complex> eigenvalues;  // leading eigenvalues when monitoring
  std::vector<std::string> flags;    // e.g. "hopf", "zero-eigenvalue", "fold"
};

/// Bracketed change of stability between points `before` and `before + 1`.
struct BranchEvent {
  std::string kind;         // "hopf", "zero-eigenvalue", or "fold"
  Index before = 0;         // index into Branch::points
  complex lambda_before{};  // tracked eigenvalue at the bracket ends
  complex lambda_after{};
  bool refined = false;
  std::optional<BranchPoint> point;  // secant-refined point with |sigma| < 1e-8
  complex lambda{};                  // tracked eigenvalue at the refined point
  int secant_iterations = 0;
};

struct Branch {
  std::vector<BranchPoint> points;
  std::string active_parameter;
  std::string problem_name;
  std::string settings_hash;
  TraceStatus status = TraceStatus::max_points;
  std::string message;
  std::vector<BranchEvent> events;
};

struct StopCriteria {
  double param_min = -std::numeric_limits<double>::infinity();
  double param_max = std::numeric_limits<double>::infinity();
  Index max_points = 100;
};

struct MonitorSettings {
  bool enabled = false;
  Index nev = 6;
  complex shift{0.0, 0.0};
  bool refine = true;
  int max_secant = 20;
  double sigma_tol = 1e-8;
};

/// y_q = J^{-1} dR/dalpha with y_alpha = -1. Singular J -> tangent_at_singularity.
Tangent compute_tangent(const Problem& pb, const Vec& q, const Parameters& p,
                        const Factorization* jacobian_factorization = nullptr);

/// (q, alpha) + (h / |y|) (y_q, y_alpha).
std::pair<Vec, Parameters> predict(const BranchPoint& point, double h);

/// Corrects a guess with the Moore-Penrose iteration; the returned point
/// carries the tangent refreshed at the converged state. Divergence ->
/// nullopt with the reason in *message.
std::optional<BranchPoint> correct_moore_penrose(const Problem& pb, const Vec& q_guess,
                                                 const Parameters& alpha_guess, const Tangent& tangent,
                                                 const NewtonSettings& settings,
                                                 std::string* message = nullptr);

/// Converged start point with its tangent.
BranchPoint make_branch_point(const Problem& pb, const Vec& q, const Parameters& p);

Branch trace_branch(const Problem& pb, const BranchPoint& start, const StepControl& control,
                    const StopCriteria& stop, const MonitorSettings& monitor = {},
                    const NewtonSettings& corrector = {});

/// Leading eigenvalues used by the monitor; a shift that hits an eigenvalue
/// exactly is nudged.
std::vector<complex> monitor_eigenvalues(const Problem& pb, const Vec& q, const Parameters& p,
                                         Index nev, complex shift);

/// Steady system as an AugmentedSystem (core = dR/dq, no extra unknowns).
class SteadySystem final : public AugmentedSystem {
 public:
  SteadySystem(const Problem& pb, Parameters p) : pb_(pb), p_(std::move(p)) {}
  [[nodiscard]] Index core_dim() const override { return pb_.dim(); }
  [[nodiscard]] Vec residual(const Vec& x, double mu) const override;
  [[nodiscard]] Linearization linearize(const Vec& x, double mu) const override;
  [[nodiscard]] Parameters params(double mu) const { return p_.with(p_.active_index(), mu); }

 private:
  const Problem& pb_;
  Parameters p_;
};

/// Stable text digest (FNV-1a, hex) used for provenance.
std::string digest(const std::string& text);

}  // namespace bifkit
