#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bifkit/continuation.hpp"
#include "bifkit/fourier.hpp"
#include "bifkit/nlsolve.hpp"
#include "bifkit/problem.hpp"

namespace bifkit {

/// q(t) = mean + sum_n (q_n e^{i n omega t} + c.c.)
Vec sample_time(const FourierState& fs, double t);

struct HarmonicResidual {
  Vec mean;                    // F_0 (real)
  std::vector<CVec> harmonics;  // F_1 .. F_N
};

/// Harmonic-balance residual of M q' + R(q) = 0 for a problem that is at most
/// cubic in q with a state-independent mass. Products are exact convolutions of
/// the retained harmonics; contributions above N are dropped.
/// Non-polynomial or state-dependent-mass problems -> unsupported_problem.
HarmonicResidual hb_residual(const Problem& pb, const FourierState& fs, const Parameters& p);

/// Packs a HarmonicResidual as (F_0, Re F_1, Im F_1, ...).
Vec pack_residual(const HarmonicResidual& r);

struct PhaseConstraint {
  double value = 0.0;
  Vec row;  // gradient over the packed unknowns (last entry, omega, is zero)
};

/// Integral phase condition sum_n <d F_n / d omega, q_n> with the frequency
/// derivative taken at the reference. All-zero reference harmonics -> degenerate_phase.
PhaseConstraint phase_constraint(const Problem& pb, const FourierState& fs, const FourierState& reference,
                                 const Parameters& p);

/// Real Jacobian of the packed residual with respect to the packed unknowns,
/// without the phase row: n(2N+1) x (n(2N+1)+1).
SparseMatrix hb_jacobian(const Problem& pb, const FourierState& fs, const Parameters& p);

/// d F / d alpha_j, packed.
Vec hb_param_gradient(const Problem& pb, const FourierState& fs, const Parameters& p, Index j);

struct HBSettings {
  Index order = 4;
  NewtonSettings newton{1e-10, 1e-12, 30};
  std::optional<FourierState> phase_reference;  // defaults to the guess
  double collapse_tol = 1e-8;                   // harmonics below this count as a steady state

  void validate() const;
};

struct HBResult {
  FourierState state;
  bool converged = false;
  bool collapsed = false;  // converged to (or started at) an equilibrium
  int iterations = 0;
  std::vector<double> residual_history;
  std::string message;
};

/// Newton solve of the harmonic-balance system plus phase condition. The guess
/// is padded or truncated to settings.order harmonics.
HBResult hb_solve(const Problem& pb, const FourierState& guess, const Parameters& p, const HBSettings& settings = {});

struct HBPoint {
  FourierState state;
  Parameters alpha;
  double period = 0.0;
  double step = 0.0;
  int iterations = 0;
};

struct HBBranch {
  std::vector<HBPoint> points;
  std::string active_parameter;
  TraceStatus status = TraceStatus::max_points;
  std::string message;
};

/// Moore-Penrose continuation of a converged orbit in the active parameter.
/// The phase reference follows the last accepted point.
HBBranch hb_trace_branch(const Problem& pb, const FourierState& start, const Parameters& p,
                         const StepControl& control, const StopCriteria& stop, const NewtonSettings& corrector = {});

struct FloquetPair {
  complex exponent;
  /// Perturbation coefficients in the order (m = 0, 1, -1, 2, -2, ...).
  std::vector<CVec> mode;
  bool principal = false;   // |Im exponent| <= omega / 2
  bool phase_mode = false;  // the neutral mode along the orbit's time derivative
  double alignment = 0.0;   // |cos| between the mode and the orbit's time derivative
  double residual_norm = 0.0;
};

/// Real Hill matrix (and its mass) in the packed basis. The periodic Jacobian
/// is expanded with the same truncation N as the orbit.
std::pair<SparseMatrix, SparseMatrix> hill_operator(const Problem& pb, const FourierState& fs, const Parameters& p);

/// Hill's-method Floquet exponents nearest `shift`.
std::vector<FloquetPair> floquet(const Problem& pb, const FourierState& fs, const Parameters& p, complex shift,
                                 Index nev);

/// ||Hill operator applied to the orbit's time derivative|| / ||time derivative||.
double phase_mode_residual(const Problem& pb, const FourierState& fs, const Parameters& p);

}  // namespace bifkit
