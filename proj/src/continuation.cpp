#include "bifkit/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>

#include "bifkit/error.hpp"
#include "bifkit/stability.hpp"

namespace bifkit {

// ---------------------------------------------------------------------------
// Generic engine

namespace {

Index extra_of(const Linearization& lin) { return lin.corner.rows(); }

// [[F_x, F_mu], [t^T]] with the bordered split kept: core plus k+1 borders.
BorderedSystem moore_penrose_system(const Linearization& lin, const UnitTangent& t) {
  const Index n = lin.core.rows(), k = extra_of(lin);
  BorderedSystem sys;
  sys.core = lin.core;
  sys.border_cols.resize(n, k + 1);
  sys.border_cols << lin.cols, lin.dmu.head(n);
  sys.border_rows.resize(k + 1, n);
  sys.border_rows.topRows(k) = lin.rows;
  sys.border_rows.row(k) = t.x.head(n).transpose();
  sys.corner.resize(k + 1, k + 1);
  sys.corner.topLeftCorner(k, k) = lin.corner;
  sys.corner.topRightCorner(k, 1) = lin.dmu.tail(k);
  sys.corner.bottomLeftCorner(1, k) = t.x.tail(k).transpose();
  sys.corner(k, k) = t.mu;
  return sys;
}

UnitTangent normalized(const Vec& y) {
  const Index N = y.size() - 1;
  const double nrm = y.norm();
  UnitTangent t;
  t.x = y.head(N) / nrm;
  t.mu = y[N] / nrm;
  return t;
}

}  // namespace

UnitTangent augmented_tangent(const Linearization& lin, const UnitTangent* previous) {
  const Index n = lin.core.rows(), k = extra_of(lin);
  try {
    const Factorization A(lin.core);
    Mat rhs(n, k + 1);
    rhs << lin.cols, lin.dmu.head(n);
    const Mat X = A.solve(rhs);
    Vec y(n + k + 1);
    if (k > 0) {
      const Mat S = lin.corner - lin.rows * X.leftCols(k);
      Eigen::FullPivLU<Mat> slu(S);
      slu.setThreshold(1e-13);
      if (!slu.isInvertible()) throw Error(ErrorKind::bordered_singular, "tangent Schur complement");
      const Vec ye = slu.solve(Vec(lin.dmu.tail(k) - lin.rows * X.col(k)));
      y.head(n) = X.col(k) - X.leftCols(k) * ye;
      y.segment(n, k) = ye;
    } else {
      y.head(n) = X.col(0);
    }
    y[n + k] = -1.0;
    if (!y.allFinite()) throw Error(ErrorKind::bordered_singular, "non-finite tangent");
    return normalized(y);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::singular_matrix && e.kind() != ErrorKind::bordered_singular) throw;
    if (previous == nullptr) {
      throw Error(ErrorKind::tangent_at_singularity, "Jacobian is singular and no previous tangent is known");
    }
  }
  const BorderedSystem sys = moore_penrose_system(lin, *previous);
  Vec bottom = Vec::Zero(k + 1);
  bottom[k] = 1.0;
  BorderedSolution sol;
  try {
    sol = solve_bordered_robust(sys, Vec::Zero(n), bottom);
  } catch (const Error& e) {
    throw Error(ErrorKind::tangent_at_singularity, std::string("tangent system singular: ") + e.what());
  }
  Vec y(n + k + 1);
  y << sol.top, sol.bottom;
  return normalized(y);
}

CorrectorResult moore_penrose_correct(const AugmentedSystem& sys, const Vec& x0, double mu0,
                                      const UnitTangent& tangent, const NewtonSettings& settings) {
  settings.validate();
  const Index n = sys.core_dim(), k = sys.extra_dim();
  CorrectorResult res;
  res.x = x0;
  res.mu = mu0;
  Vec F = sys.residual(res.x, res.mu);
  double fn = F.norm();
  const double f0 = fn;
  res.residual_history.push_back(fn);
  if (!std::isfinite(fn)) {
    res.message = "non-finite residual at the predictor";
    return res;
  }
  for (int it = 1; it <= settings.max_iterations && fn > settings.abs_tol; ++it) {
    const Linearization lin = sys.linearize(res.x, res.mu);
    const BorderedSystem bs = moore_penrose_system(lin, tangent);
    Vec bottom(k + 1);
    bottom << F.tail(k), 0.0;
    BorderedSolution sol;
    try {
      try {
        sol = solve_bordered(bs, F.head(n), bottom, Factorization(bs.core));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::singular_matrix && e.kind() != ErrorKind::bordered_singular) throw;
        sol = solve_bordered_robust(bs, F.head(n), bottom);
      }
    } catch (const Error& e) {
      res.message = std::string("corrector solve failed: ") + e.what();
      return res;
    }
    res.x.head(n) -= sol.top;
    res.x.tail(k) -= sol.bottom.head(k);
    res.mu -= sol.bottom[k];
    F = sys.residual(res.x, res.mu);
    fn = F.norm();
    res.iterations = it;
    res.residual_history.push_back(fn);
    if (!std::isfinite(fn) || fn > 1e6 * std::max(1.0, f0)) {
      res.message = "corrector diverged";
      return res;
    }
  }
  res.converged = fn <= settings.abs_tol;
  if (!res.converged) res.message = "corrector did not converge, |F| = " + std::to_string(fn);
  return res;
}

void StepControl::validate() const {
  if (!(h_min > 0.0) || !(h_min <= std::abs(h0)) || !(std::abs(h0) <= h_max) || target_iterations < 1 ||
      !(growth_cap >= 1.0) || !(shrink_cap > 0.0 && shrink_cap <= 1.0)) {
    throw Error(ErrorKind::invalid_configuration, "step control requires 0 < h_min <= |h0| <= h_max");
  }
}

double adapt_step(double h, int corrector_iterations, const StepControl& control) {
  double f = std::exp2(0.5 * (control.target_iterations - corrector_iterations));
  f = std::clamp(f, control.shrink_cap, control.growth_cap);
  const double mag = std::clamp(std::abs(h) * f, control.h_min, control.h_max);
  return h < 0.0 ? -mag : mag;
}

const char* to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::max_points: return "max-points";
    case TraceStatus::left_bounds: return "left-bounds";
    case TraceStatus::step_too_small: return "step-too-small";
    case TraceStatus::stopped: return "stopped";
    case TraceStatus::failed: return "failed";
  }
  return "?";
}

CurveResult trace_curve(AugmentedSystem& sys, CurvePoint start, const EngineSettings& settings,
                        const AcceptHook& hook) {
  settings.control.validate();
  CurveResult out;
  const StepControl& ctl = settings.control;
  try {
    if (start.tangent.x.size() == 0) {
      start.tangent = augmented_tangent(sys.linearize(start.x, start.mu));
      if (start.tangent.mu * ctl.h0 < 0.0) {
        start.tangent.x = -start.tangent.x;
        start.tangent.mu = -start.tangent.mu;
      }
    }
    sys.accept(start.x, start.mu);
    out.points.push_back(start);

    double h = std::abs(ctl.h0);
    while (static_cast<Index>(out.points.size()) < settings.max_points) {
      const CurvePoint& cur = out.points.back();
      const Vec xg = cur.x + h * cur.tangent.x;
      const double mug = cur.mu + h * cur.tangent.mu;
      CorrectorResult corr = moore_penrose_correct(sys, xg, mug, cur.tangent, settings.corrector);

      bool ok = corr.converged;
      UnitTangent t;
      if (ok) {
        const double dist = std::sqrt((corr.x - cur.x).squaredNorm() + std::pow(corr.mu - cur.mu, 2));
        ok = dist <= 1.5 * ctl.h_max;
        if (!ok) corr.message = "corrected point jumped too far";
      }
      if (ok) {
        try {
          t = augmented_tangent(sys.linearize(corr.x, corr.mu), &cur.tangent);
          if (t.dot(cur.tangent) < 0.0) {
            t.x = -t.x;
            t.mu = -t.mu;
          }
        } catch (const Error& e) {
          ok = false;
          corr.message = e.what();
        }
      }
      if (!ok) {
        h *= 0.5;
        if (h < ctl.h_min) {
          out.status = TraceStatus::step_too_small;
          out.message = corr.message;
          return out;
        }
        continue;
      }
      if (corr.mu < settings.mu_min || corr.mu > settings.mu_max) {
        out.status = TraceStatus::left_bounds;
        return out;
      }
      CurvePoint next;
      next.x = std::move(corr.x);
      next.mu = corr.mu;
      next.tangent = std::move(t);
      next.step = h;
      next.iterations = corr.iterations;
      sys.accept(next.x, next.mu);
      out.points.push_back(std::move(next));
      if (hook && !hook(out.points[out.points.size() - 2], out.points.back())) {
        out.status = TraceStatus::stopped;
        return out;
      }
      h = adapt_step(h, out.points.back().iterations, ctl);
    }
    out.status = TraceStatus::max_points;
  } catch (const Error& e) {
    out.status = TraceStatus::failed;
    out.message = e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Steady branches

Vec SteadySystem::residual(const Vec& x, double mu) const { return pb_.residual(x, params(mu)); }

Linearization SteadySystem::linearize(const Vec& x, double mu) const {
  const Parameters p = params(mu);
  const Index n = pb_.dim();
  Linearization lin;
  lin.core = pb_.jacobian(x, p);
  lin.cols.resize(n, 0);
  lin.rows.resize(0, n);
  lin.corner.resize(0, 0);
  lin.dmu = pb_.param_gradient(x, p, p_.active_index());
  return lin;
}

Tangent compute_tangent(const Problem& pb, const Vec& q, const Parameters& p,
                        const Factorization* jacobian_factorization) {
  check_dimensions(pb, q, p);
  Factorization local;
  if (jacobian_factorization == nullptr) {
    try {
      local = Factorization(pb.jacobian(q, p));
    } catch (const SingularMatrixError&) {
      throw Error(ErrorKind::tangent_at_singularity, "Jacobian is singular at the tangent point");
    }
    jacobian_factorization = &local;
  }
  Tangent t;
  t.y_q = jacobian_factorization->solve(pb.param_gradient(q, p, p.active_index()));
  t.y_alpha = -1.0;
  return t;
}

std::pair<Vec, Parameters> predict(const BranchPoint& point, double h) {
  const double s = h / point.tangent.norm();
  Parameters a = point.alpha;
  a.set_active_value(a.active_value() + s * point.tangent.y_alpha);
  return {point.q + s * point.tangent.y_q, a};
}

namespace {

UnitTangent to_unit(const Tangent& t) {
  const double nrm = t.norm();
  return {t.y_q / nrm, t.y_alpha / nrm};
}

Tangent from_unit(const UnitTangent& t) { return {t.x, t.mu}; }

}  // namespace

std::optional<BranchPoint> correct_moore_penrose(const Problem& pb, const Vec& q_guess,
                                                 const Parameters& alpha_guess, const Tangent& tangent,
                                                 const NewtonSettings& settings, std::string* message) {
  check_dimensions(pb, q_guess, alpha_guess);
  SteadySystem sys(pb, alpha_guess);
  const UnitTangent t0 = to_unit(tangent);
  CorrectorResult c = moore_penrose_correct(sys, q_guess, alpha_guess.active_value(), t0, settings);
  if (!c.converged) {
    if (message) *message = c.message;
    return std::nullopt;
  }
  UnitTangent t = augmented_tangent(sys.linearize(c.x, c.mu), &t0);
  if (t.dot(t0) < 0.0) {
    t.x = -t.x;
    t.mu = -t.mu;
  }
  BranchPoint bp;
  bp.q = std::move(c.x);
  bp.alpha = sys.params(c.mu);
  bp.tangent = from_unit(t);
  bp.corrector_iterations = c.iterations;
  return bp;
}

BranchPoint make_branch_point(const Problem& pb, const Vec& q, const Parameters& p) {
  BranchPoint bp;
  bp.q = q;
  bp.alpha = p;
  bp.tangent = compute_tangent(pb, q, p);
  return bp;
}

std::vector<complex> monitor_eigenvalues(const Problem& pb, const Vec& q, const Parameters& p, Index nev,
                                         complex shift) {
  EigsSettings s;
  s.nev = std::min<Index>(nev, pb.dim());
  s.shift = shift;
  for (int attempt = 0;; ++attempt) {
    try {
      std::vector<complex> out;
      for (const auto& e : eigs(pb, q, p, s)) out.push_back(e.lambda);
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::singular_shift || attempt >= 3) throw;
      s.shift += complex(1e-7 * (1.0 + std::abs(s.shift)) * (attempt + 1), 0.0);
    }
  }
}

namespace {

struct Crossing {
  complex before, after;
};

// Sign changes of Re(lambda) between two monitored sets, matched by nearest
// eigenvalue; one entry per conjugate pair.
std::vector<Crossing> crossings(const std::vector<complex>& prev, const std::vector<complex>& cur) {
  std::vector<Crossing> out;
  if (prev.empty()) return out;
  for (const complex& c : cur) {
    if (c.imag() < -1e-10 * (1.0 + std::abs(c))) continue;
    const complex* best = nullptr;
    for (const complex& p : prev) {
      if (best == nullptr || std::abs(p - c) < std::abs(*best - c)) best = &p;
    }
    if ((best->real() < 0.0) != (c.real() < 0.0)) out.push_back({*best, c});
  }
  return out;
}

bool is_oscillatory(const Crossing& x) {
  return std::max(std::abs(x.before.imag()), std::abs(x.after.imag())) > 1e-6;
}

// Point on the branch at arclength s along the tangent of `a`.
std::optional<BranchPoint> point_at(const Problem& pb, const BranchPoint& a, double s,
                                    const NewtonSettings& settings) {
  const auto [qg, pg] = predict(a, s);
  return correct_moore_penrose(pb, qg, pg, a.tangent, settings);
}

double unit_alpha(const Tangent& t) { return t.y_alpha / t.norm(); }

// Illinois-safeguarded secant on f over s in [0, sb] with f(0), f(sb) of opposite sign.
template <typename Eval>
bool secant(double fa, double fb, double sb, int max_steps, double tol, Eval&& eval, int* steps) {
  double a = 0.0, b = sb;
  int side = 0;
  for (int it = 1; it <= max_steps; ++it) {
    *steps = it;
    const double s = (a * fb - b * fa) / (fb - fa);
    const double f = eval(s);
    if (!std::isfinite(f)) return false;
    if (std::abs(f) < tol) return true;
    if ((f < 0.0) == (fa < 0.0)) {
      a = s;
      fa = f;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = s;
      fb = f;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
  }
  return false;
}

void refine_event(const Problem& pb, const Branch& br, BranchEvent& ev, const MonitorSettings& mon,
                  const NewtonSettings& settings) {
  const BranchPoint& a = br.points[static_cast<std::size_t>(ev.before)];
  const BranchPoint& b = br.points[static_cast<std::size_t>(ev.before + 1)];
  const double na = a.tangent.norm();
  double sb = (b.q - a.q).dot(a.tangent.y_q) / na +
              (b.alpha.active_value() - a.alpha.active_value()) * a.tangent.y_alpha / na;
  std::optional<BranchPoint> last;
  complex lam_last = ev.lambda_before;
  auto track = [&](double s) -> double {
    auto p = point_at(pb, a, s, settings);
    if (!p) return std::numeric_limits<double>::quiet_NaN();
    if (ev.kind == "fold") {
      last = p;
      return unit_alpha(p->tangent);
    }
    // Interpolated guess for the tracked eigenvalue, then the nearest one.
    const complex guess = ev.lambda_before + (s / sb) * (ev.lambda_after - ev.lambda_before);
    const complex shift = ev.kind == "hopf" ? complex(0.0, std::abs(guess.imag())) : complex(0.0, 0.0);
    const auto lams = monitor_eigenvalues(pb, p->q, p->alpha, 2, shift);
    complex best = lams.front();
    for (const complex& l : lams) {
      if (ev.kind == "hopf" && l.imag() < 0.0) continue;
      if (std::abs(l - guess) < std::abs(best - guess) || (ev.kind == "hopf" && best.imag() < 0.0)) best = l;
    }
    last = p;
    lam_last = best;
    return best.real();
  };
  double fa, fb;
  if (ev.kind == "fold") {
    fa = unit_alpha(a.tangent);
    fb = unit_alpha(b.tangent);
  } else {
    fa = ev.lambda_before.real();
    fb = ev.lambda_after.real();
  }
  if (!(sb > 0.0) || fa * fb > 0.0) return;
  const double tol = ev.kind == "fold" ? 1e-10 : mon.sigma_tol;
  ev.refined = secant(fa, fb, sb, mon.max_secant, tol, track, &ev.secant_iterations);
  if (last) {
    ev.point = last;
    ev.lambda = lam_last;
  }
}

std::string branch_settings_text(const StepControl& c, const StopCriteria& s, const MonitorSettings& m,
                                 const NewtonSettings& n) {
  std::ostringstream os;
  os.precision(17);
  os << c.h0 << ',' << c.h_min << ',' << c.h_max << ',' << c.target_iterations << ',' << c.growth_cap << ','
     << c.shrink_cap << ';' << s.param_min << ',' << s.param_max << ',' << s.max_points << ';' << m.enabled
     << ',' << m.nev << ',' << m.shift.real() << ',' << m.shift.imag() << ';' << n.abs_tol << ','
     << n.rel_tol << ',' << n.max_iterations;
  return os.str();
}

}  // namespace

Branch trace_branch(const Problem& pb, const BranchPoint& start, const StepControl& control,
                    const StopCriteria& stop, const MonitorSettings& monitor, const NewtonSettings& corrector) {
  check_dimensions(pb, start.q, start.alpha);
  Branch br;
  br.active_parameter = start.alpha.active_name();
  br.problem_name = pb.name();
  br.settings_hash = digest(branch_settings_text(control, stop, monitor, corrector));

  SteadySystem sys(pb, start.alpha);
  CurvePoint cp;
  cp.x = start.q;
  cp.mu = start.alpha.active_value();
  Tangent t0 = start.tangent.empty() ? compute_tangent(pb, start.q, start.alpha) : start.tangent;
  cp.tangent = to_unit(t0);
  // The sign of h0 selects the direction of the active parameter.
  if (std::abs(cp.tangent.mu) > 1e-12 && cp.tangent.mu * control.h0 < 0.0) {
    cp.tangent.x = -cp.tangent.x;
    cp.tangent.mu = -cp.tangent.mu;
  } else if (std::abs(cp.tangent.mu) <= 1e-12 && control.h0 < 0.0) {
    cp.tangent.x = -cp.tangent.x;
    cp.tangent.mu = -cp.tangent.mu;
  }

  EngineSettings es;
  es.control = control;
  es.corrector = corrector;
  es.max_points = stop.max_points;
  es.mu_min = stop.param_min;
  es.mu_max = stop.param_max;

  auto to_branch_point = [&](const CurvePoint& c) {
    BranchPoint bp;
    bp.q = c.x;
    bp.alpha = sys.params(c.mu);
    bp.tangent = from_unit(c.tangent);
    bp.step_used = c.step;
    bp.corrector_iterations = c.iterations;
    if (monitor.enabled) bp.eigenvalues = monitor_eigenvalues(pb, bp.q, bp.alpha, monitor.nev, monitor.shift);
    return bp;
  };

  try {
    br.points.push_back(to_branch_point(cp));
  } catch (const Error& e) {
    br.status = TraceStatus::failed;
    br.message = e.what();
    return br;
  }
  AcceptHook hook = [&](const CurvePoint&, const CurvePoint& cur) {
    br.points.push_back(to_branch_point(cur));
    const BranchPoint& a = br.points[br.points.size() - 2];
    const BranchPoint& b = br.points.back();
    const Index before = static_cast<Index>(br.points.size()) - 2;
    const bool fold = (a.tangent.y_alpha < 0.0) != (b.tangent.y_alpha < 0.0);
    if (fold) {
      BranchEvent ev;
      ev.kind = "fold";
      ev.before = before;
      br.events.push_back(ev);
      br.points.back().flags.push_back("fold");
    }
    for (const Crossing& x : crossings(a.eigenvalues, b.eigenvalues)) {
      const bool hopf = is_oscillatory(x);
      if (!hopf && fold) continue;
      BranchEvent ev;
      ev.kind = hopf ? "hopf" : "zero-eigenvalue";
      ev.before = before;
      ev.lambda_before = x.before;
      ev.lambda_after = x.after;
      br.events.push_back(ev);
      br.points.back().flags.push_back(ev.kind);
    }
    return true;
  };
  cp.step = 0.0;
  const CurveResult res = trace_curve(sys, cp, es, hook);
  br.status = res.status;
  br.message = res.message;
  if (monitor.refine) {
    for (BranchEvent& ev : br.events) {
      try {
        refine_event(pb, br, ev, monitor, corrector);
      } catch (const Error&) {
        ev.refined = false;
      }
    }
  }
  return br;
}

std::string digest(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bifkit
