#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bifkit/continuation.hpp"
#include "bifkit/fourier.hpp"
#include "bifkit/problem.hpp"

namespace bifkit {

enum class BifKind { fold, pitchfork, hopf };
const char* to_string(BifKind k);
BifKind bif_kind_from_string(const std::string& s);

enum class FormKind { quadratic, cubic };

struct NormalForm {
  FormKind form = FormKind::quadratic;
  std::vector<complex> eigen_drift;  // d lambda / d alpha_j for every parameter
  complex beta{};
  /// Observable classification: Re(beta) < 0 gives a stable small-amplitude
  /// orbit (cubic) on the side where Re(drift . dalpha) > 0.
  [[nodiscard]] bool supercritical() const { return beta.real() < 0.0; }
  /// Label under the convention "Re(beta) > 0 is supercritical".
  [[nodiscard]] const char* paper_label() const {
    return beta.real() > 0.0 ? "supercritical" : "subcritical";
  }
};

struct BifPoint {
  BifKind kind = BifKind::fold;
  Vec q;
  Parameters alpha;
  double omega = 0.0;
  CVec direct_mode;   // <q, M q> = 1
  CVec adjoint_mode;  // <q_adj, M q> = 1
  complex g_residual{};
  std::optional<NormalForm> normal_form;

  bool converged = false;
  int iterations = 0;
  std::vector<double> g_history;
  std::vector<double> residual_history;
  std::string message;  // why the locator stopped when not converged
};

struct Criticality {
  complex g;
  CVec q_hat;  // scaled so <M v, q_hat> = 1
  CVec q_adj;  // scaled so <M w, q_adj> = 1
};

/// Bordered definition of the criticality variable at (q, alpha, omega) with
/// bordering vectors v (direct) and w (adjoint). Both bordered systems are
/// solved through the shifted core; an exactly singular core falls back to the
/// assembled system. A vanishing 1/g -> degenerate_bordering.
Criticality criticality(const Problem& pb, const Vec& q, const Parameters& p, double omega,
                        const CVec& v_hat, const CVec& w_hat);

/// Derivatives of g for fixed bordering vectors: dg = dq . dq-coefficients +
/// dalpha_j * dalpha[j] + domega * domega-coefficient.
struct GDerivatives {
  CVec dq;                    // dg = sum_j dq[j] * delta q_j
  std::vector<complex> dalpha;
  complex domega;
};
GDerivatives g_derivatives(const Problem& pb, const Vec& q, const Parameters& p, double omega,
                           const CVec& q_hat, const CVec& q_adj);

struct LocatorSettings {
  NewtonSettings newton{1e-10, 1e-12, 30};
  double min_omega = 1e-6;  // a Hopf locate whose omega falls below this is reclassified
};

/// Minimally augmented Newton iteration on (q, alpha_active[, omega]).
/// Non-convergence is reported through converged = false and the histories.
BifPoint locate_bifurcation(const Problem& pb, BifKind kind, const Vec& q0, const Parameters& p0,
                            double omega0, const CVec& v_hat, const CVec& w_hat,
                            const LocatorSettings& settings = {});

/// Seeds from an eigen solve near i*omega0 (or 0), then locates.
BifPoint locate_from_guess(const Problem& pb, BifKind kind, const Vec& q0, const Parameters& p0,
                           double omega0, const LocatorSettings& settings = {});

enum class ZeroKind { fold, pitchfork_or_branch_point };
const char* to_string(ZeroKind k);

/// fold when |<q_adj, dR/dalpha>| > class_tol * |dR/dalpha|.
ZeroKind classify_zero_eigenvalue(const Problem& pb, const BifPoint& bif, double class_tol = 1e-6);

/// Quadratic form for folds; cubic for Hopf and pitchfork points.
/// Singular 2 i omega M + J -> resonance.
NormalForm normal_form(const Problem& pb, const BifPoint& bif);

struct WeaklyNonlinear {
  double amplitude = 0.0;  // |A|
  Vec state;               // q + A Re(q_hat) for quadratic/pitchfork forms
  std::optional<FourierState> orbit;  // first-harmonic seed for Hopf points
  double omega = 0.0;
};

/// Amplitude of the normal form at alpha = bif.alpha + dalpha (one entry per
/// parameter). No real amplitude -> no_orbit.
WeaklyNonlinear weakly_nonlinear_predict(const BifPoint& bif, const Vec& dalpha, Index harmonics = 4);

struct Codim2Event {
  Index index = 0;   // first point after the change
  std::string type;  // bautin, bogdanov-takens-candidate, cusp-candidate, fold-hopf-candidate
};

struct BifCurve {
  std::vector<BifPoint> points;
  std::string primary_parameter;
  std::string second_parameter;
  std::vector<Codim2Event> codim2_events;
  TraceStatus status = TraceStatus::max_points;
  std::string message;
};

struct CurveStop {
  double second_min = -std::numeric_limits<double>::infinity();
  double second_max = std::numeric_limits<double>::infinity();
  Index max_points = 100;
  /// A Hopf curve stops with a bogdanov-takens-candidate flag once omega
  /// falls below this fraction of its starting value.
  double bt_omega_fraction = 0.02;
};

BifCurve trace_bifurcation_curve(const Problem& pb, const BifPoint& bif, const std::string& second_param,
                                 const StepControl& control, const CurveStop& stop = {},
                                 const LocatorSettings& settings = {});

/// Locates every event of a monitored branch (Hopf, zero-eigenvalue, fold);
/// zero-eigenvalue points are labelled fold or pitchfork by
/// classify_zero_eigenvalue. Events whose locator fails are skipped.
std::vector<BifPoint> locate_branch_events(const Problem& pb, const Branch& branch,
                                           const LocatorSettings& settings = {});

}  // namespace bifkit
