#include "bifkit/bifurcation.hpp"

#include <algorithm>
#include <cmath>

#include "bifkit/error.hpp"
#include "bifkit/linalg.hpp"
#include "bifkit/stability.hpp"

namespace bifkit {

const char* to_string(BifKind k) {
  switch (k) {
    case BifKind::fold: return "fold";
    case BifKind::pitchfork: return "pitchfork";
    case BifKind::hopf: return "hopf";
  }
  return "?";
}

BifKind bif_kind_from_string(const std::string& s) {
  if (s == "fold") return BifKind::fold;
  if (s == "pitchfork") return BifKind::pitchfork;
  if (s == "hopf") return BifKind::hopf;
  throw Error(ErrorKind::invalid_configuration, "unknown bifurcation kind '" + s + "'");
}

const char* to_string(ZeroKind k) {
  return k == ZeroKind::fold ? "fold" : "pitchfork-or-branch-point";
}

namespace {

CVec to_complex(const Vec& v) { return v.cast<complex>(); }

SparseMatrix doubled_core(const SparseMatrix& Cr, const SparseMatrix& Ci) {
  const Index n = Cr.rows();
  std::vector<Triplet> t;
  t.reserve(2 * (Cr.nonZeros() + Ci.nonZeros()));
  for (Index c = 0; c < n; ++c) {
    for (SparseMatrix::InnerIterator it(Cr, c); it; ++it) {
      t.emplace_back(it.row(), c, -it.value());
      t.emplace_back(n + it.row(), n + c, -it.value());
    }
    for (SparseMatrix::InnerIterator it(Ci, c); it; ++it) {
      t.emplace_back(it.row(), n + c, it.value());
      t.emplace_back(n + it.row(), c, -it.value());
    }
  }
  SparseMatrix D(2 * n, 2 * n);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

// Solves [[-(Cr + i Ci), b], [c^H, 0]] [x; s] = [0; 1] in real arithmetic.
std::pair<CVec, complex> bordered_unit_solve(const SparseMatrix& Cr, const SparseMatrix& Ci,
                                             const CVec& b, const CVec& c) {
  const Index n = Cr.rows();
  BorderedSystem sys;
  sys.core = doubled_core(Cr, Ci);
  sys.border_cols.resize(2 * n, 2);
  sys.border_cols << b.real(), -b.imag(), b.imag(), b.real();
  sys.border_rows.resize(2, 2 * n);
  sys.border_rows << c.real().transpose(), c.imag().transpose(), -c.imag().transpose(),
      c.real().transpose();
  sys.corner = Mat::Zero(2, 2);
  BorderedSolution sol;
  try {
    sol = solve_bordered_robust(sys, Vec::Zero(2 * n), Vec::Unit(2, 0));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::bordered_singular) throw;
    throw Error(ErrorKind::degenerate_bordering, std::string("criticality bordering failed: ") + e.what());
  }
  CVec x(n);
  x.real() = sol.top.head(n);
  x.imag() = sol.top.tail(n);
  return {x, complex(sol.bottom[0], sol.bottom[1])};
}

struct Modes {
  CVec q_hat;
  CVec q_adj;
};

// <q, M q> = 1 with the largest entry real positive, then <q_adj, M q> = 1.
Modes normalize_modes(const Problem& pb, const Vec& q, const Parameters& p, CVec qh, CVec qa) {
  const double s = std::sqrt(std::abs(inner(qh, mass_apply(pb, q, p, qh))));
  if (!(s > 0.0)) throw Error(ErrorKind::degenerate_bordering, "zero direct mode");
  qh /= s;
  Index imax = 0;
  qh.cwiseAbs().maxCoeff(&imax);
  qh *= std::conj(qh[imax]) / std::abs(qh[imax]);
  const complex c = inner(qa, mass_apply(pb, q, p, qh));
  if (std::abs(c) == 0.0) throw Error(ErrorKind::degenerate_bordering, "adjoint mode orthogonal to M q");
  qa /= std::conj(c);
  return {qh, qa};
}

Index extra_count(BifKind kind) { return kind == BifKind::hopf ? 2 : 1; }

Vec g_part(BifKind kind, complex g) {
  if (kind == BifKind::hopf) return Vec{{g.real(), g.imag()}};
  return Vec{{g.real()}};
}

BorderedSystem newton_system(const Problem& pb, BifKind kind, const Vec& q, const Parameters& p,
                             const GDerivatives& dg) {
  const Index n = pb.dim(), k = extra_count(kind), a = p.active_index();
  BorderedSystem sys;
  sys.core = pb.jacobian(q, p);
  sys.border_cols = Mat::Zero(n, k);
  sys.border_cols.col(0) = pb.param_gradient(q, p, a);
  sys.border_rows.resize(k, n);
  sys.border_rows.row(0) = dg.dq.real().transpose();
  sys.corner.resize(k, k);
  sys.corner(0, 0) = dg.dalpha[a].real();
  if (kind == BifKind::hopf) {
    sys.border_rows.row(1) = dg.dq.imag().transpose();
    sys.corner(0, 1) = dg.domega.real();
    sys.corner(1, 0) = dg.dalpha[a].imag();
    sys.corner(1, 1) = dg.domega.imag();
  }
  return sys;
}

CVec unit_seed(const CVec& v) {
  const double n = v.norm();
  return n > 0.0 ? CVec(v / n) : v;
}

BifPoint finish_point(const Problem& pb, BifKind kind, const Vec& q, const Parameters& p, double omega,
                      const CVec& v_hat, const CVec& w_hat) {
  BifPoint out;
  out.kind = kind;
  out.q = q;
  out.alpha = p;
  out.omega = omega;
  const Criticality c = criticality(pb, q, p, omega, v_hat, w_hat);
  out.g_residual = c.g;
  Modes m = normalize_modes(pb, q, p, c.q_hat, c.q_adj);
  if (kind != BifKind::hopf) {
    m.q_hat = to_complex(m.q_hat.real());
    m.q_adj = to_complex(m.q_adj.real());
  }
  out.direct_mode = std::move(m.q_hat);
  out.adjoint_mode = std::move(m.q_adj);
  return out;
}

// Real pseudo-inverse solve at a zero eigenvalue: J x + s M q = b, q^T x = 0.
Vec pseudo_solve(const SparseMatrix& J, const Vec& Mq, const Vec& qh, const Vec& b) {
  BorderedSystem sys;
  sys.core = J;
  sys.border_cols = Mq;
  sys.border_rows = qh.transpose();
  sys.corner = Mat::Zero(1, 1);
  return solve_bordered_robust(sys, b, Vec::Zero(1)).top;
}

}  // namespace

Criticality criticality(const Problem& pb, const Vec& q, const Parameters& p, double omega,
                        const CVec& v_hat, const CVec& w_hat) {
  check_dimensions(pb, q, p);
  if (v_hat.size() != pb.dim() || w_hat.size() != pb.dim()) {
    throw Error(ErrorKind::dimension_mismatch, "bordering vectors must have the problem dimension");
  }
  if (v_hat.norm() == 0.0 || w_hat.norm() == 0.0) {
    throw Error(ErrorKind::degenerate_bordering, "bordering vectors must be nonzero");
  }
  const SparseMatrix J = pb.jacobian(q, p);
  const SparseMatrix M = pb.mass_matrix(q, p);
  const CVec Mv = mass_apply(pb, q, p, v_hat);
  const CVec Mw = mass_apply(pb, q, p, w_hat);

  const SparseMatrix Ci = omega * M;
  auto [qh, g] = bordered_unit_solve(J, Ci, Mw, Mv);
  const SparseMatrix Jt = J.transpose();
  const SparseMatrix Cit = SparseMatrix(-omega * M.transpose());
  auto [qa, gs] = bordered_unit_solve(Jt, Cit, Mv, Mw);
  (void)gs;  // equals conj(g) up to rounding
  if (!std::isfinite(std::abs(g))) throw Error(ErrorKind::degenerate_bordering, "non-finite criticality");
  return {g, qh, qa};
}

GDerivatives g_derivatives(const Problem& pb, const Vec& q, const Parameters& p, double omega,
                           const CVec& q_hat, const CVec& q_adj) {
  const Index n = pb.dim();
  const complex iw(0.0, omega);
  GDerivatives out;
  const Vec ar = q_adj.real(), ai = q_adj.imag();
  const SparseMatrix Hr = pb.hessian_matrix(q, p, q_hat.real());
  const SparseMatrix Hi = pb.hessian_matrix(q, p, q_hat.imag());
  // G_j = sum_i conj(a_i) (Hr + i Hi)_ij
  const Vec re = Hr.transpose() * ar + Hi.transpose() * ai;
  const Vec im = Hi.transpose() * ar - Hr.transpose() * ai;
  out.dq.resize(n);
  out.dq.real() = re;
  out.dq.imag() = im;
  if (!pb.constant_mass() && omega != 0.0) {
    for (Index j = 0; j < n; ++j) {
      const CVec ej = to_complex(Vec::Unit(n, j));
      out.dq[j] += iw * inner(q_adj, mass_jacobian_apply(pb, q, p, ej, q_hat));
    }
  }
  out.dalpha.resize(p.size());
  for (Index j = 0; j < p.size(); ++j) {
    CVec v = mixed_param_jacobian_apply(pb, q, p, j, q_hat);
    if (omega != 0.0) v += iw * mass_param_gradient_apply(pb, q, p, j, q_hat);
    out.dalpha[j] = inner(q_adj, v);
  }
  out.domega = inner(q_adj, complex(0.0, 1.0) * mass_apply(pb, q, p, q_hat));
  return out;
}

BifPoint locate_bifurcation(const Problem& pb, BifKind kind, const Vec& q0, const Parameters& p0,
                            double omega0, const CVec& v_hat, const CVec& w_hat,
                            const LocatorSettings& settings) {
  settings.newton.validate();
  check_dimensions(pb, q0, p0);
  const bool hopf = kind == BifKind::hopf;
  const Index a = p0.active_index();
  Vec q = q0;
  Parameters p = p0;
  double omega = hopf ? omega0 : 0.0;
  CVec v = unit_seed(v_hat), w = unit_seed(w_hat);
  if (!hopf) {
    v = to_complex(v.real().norm() > 0.0 ? Vec(v.real()) : Vec(v.imag()));
    w = to_complex(w.real().norm() > 0.0 ? Vec(w.real()) : Vec(w.imag()));
  }

  BifPoint out;
  out.kind = kind;
  const double tol = settings.newton.abs_tol;
  for (int it = 0;; ++it) {
    const Vec R = pb.residual(q, p);
    const Criticality c = criticality(pb, q, p, omega, v, w);
    const double rn = R.norm(), gn = hopf ? std::abs(c.g) : std::abs(c.g.real());
    out.residual_history.push_back(rn);
    out.g_history.push_back(gn);
    if (!std::isfinite(rn) || !std::isfinite(gn)) {
      out.message = "non-finite residual";
      break;
    }
    if (rn < tol && gn < tol) {
      out.converged = true;
      break;
    }
    if (it == settings.newton.max_iterations) {
      out.message = "no convergence in " + std::to_string(it) + " iterations";
      break;
    }
    const GDerivatives dg = g_derivatives(pb, q, p, omega, c.q_hat, c.q_adj);
    const BorderedSystem sys = newton_system(pb, kind, q, p, dg);
    BorderedSolution sol;
    try {
      sol = solve_bordered_robust(sys, R, g_part(kind, c.g));
    } catch (const Error& e) {
      out.message = std::string("locator step failed: ") + e.what();
      break;
    }
    q -= sol.top;
    p.set(a, p[a] - sol.bottom[0]);
    if (hopf) {
      omega -= sol.bottom[1];
      if (std::abs(omega) < settings.min_omega) {
        throw Error(ErrorKind::reclassify_candidate,
                    "omega collapsed to zero during a hopf locate (fold or Bogdanov-Takens nearby)");
      }
    }
    out.iterations = it + 1;
    // Refresh the bordering with the current mode estimates.
    const Modes m = normalize_modes(pb, q, p, c.q_hat, c.q_adj);
    v = unit_seed(m.q_hat);
    w = unit_seed(m.q_adj);
    if (!hopf) {
      v = to_complex(v.real());
      w = to_complex(w.real());
    }
  }

  if (hopf && omega < 0.0) {
    omega = -omega;
    v = v.conjugate();
    w = w.conjugate();
  }
  BifPoint done = finish_point(pb, kind, q, p, omega, v, w);
  done.converged = out.converged;
  done.iterations = out.iterations;
  done.g_history = std::move(out.g_history);
  done.residual_history = std::move(out.residual_history);
  done.message = std::move(out.message);
  return done;
}

BifPoint locate_from_guess(const Problem& pb, BifKind kind, const Vec& q0, const Parameters& p0, double omega0,
                           const LocatorSettings& settings) {
  const bool hopf = kind == BifKind::hopf;
  EigsSettings es;
  es.shift = hopf ? complex(0.0, std::abs(omega0)) : complex(0.0, 0.0);
  es.nev = 2;
  es.want_adjoint = true;
  std::vector<EigenPair> pairs;
  try {
    pairs = eigs(pb, q0, p0, es);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::singular_shift) throw;
    es.shift += complex(1e-7, 0.0);
    pairs = eigs(pb, q0, p0, es);
  }
  if (pairs.empty()) throw Error(ErrorKind::degenerate_bordering, "no eigenpair to seed the locator");
  const EigenPair* best = &pairs.front();
  if (hopf) {
    for (const EigenPair& ep : pairs) {
      if (ep.lambda.imag() > 0.0) {
        best = &ep;
        break;
      }
    }
  }
  const CVec v = best->direct_mode;
  const CVec w = best->adjoint_mode ? *best->adjoint_mode : v;
  const double om = hopf ? std::abs(best->lambda.imag()) : 0.0;
  return locate_bifurcation(pb, kind, q0, p0, om, v, w, settings);
}

ZeroKind classify_zero_eigenvalue(const Problem& pb, const BifPoint& bif, double class_tol) {
  const Vec dR = pb.param_gradient(bif.q, bif.alpha, bif.alpha.active_index());
  const double proj = std::abs(inner(bif.adjoint_mode, to_complex(dR)));
  return proj > class_tol * dR.norm() ? ZeroKind::fold : ZeroKind::pitchfork_or_branch_point;
}

NormalForm normal_form(const Problem& pb, const BifPoint& bif) {
  const Vec& q = bif.q;
  const Parameters& p = bif.alpha;
  const CVec& qh = bif.direct_mode;
  const CVec& qa = bif.adjoint_mode;
  const SparseMatrix J = pb.jacobian(q, p);
  NormalForm nf;
  nf.eigen_drift.resize(p.size());

  if (bif.kind == BifKind::fold) {
    nf.form = FormKind::quadratic;
    for (Index j = 0; j < p.size(); ++j) nf.eigen_drift[j] = -inner(qa, to_complex(pb.param_gradient(q, p, j)));
    nf.beta = -0.5 * inner(qa, hessian_apply(pb, q, p, qh, qh));
    return nf;
  }

  nf.form = FormKind::cubic;
  if (bif.kind == BifKind::pitchfork) {
    const Vec qr = qh.real(), ar = qa.real();
    const Vec Mq = pb.mass_apply(q, p, qr);
    const Vec h2 = pb.hessian_apply(q, p, qr, qr);
    const Vec x = pseudo_solve(J, Mq, qr, h2);
    const double beta = -ar.dot(pb.third_apply(q, p, qr, qr, qr)) / 6.0 +
                        0.5 * ar.dot(pb.hessian_apply(q, p, qr, x));
    nf.beta = beta;
    for (Index j = 0; j < p.size(); ++j) {
      const Vec qa_j = -pseudo_solve(J, Mq, qr, pb.param_gradient(q, p, j));
      const Vec t = pb.mixed_param_jacobian_apply(q, p, j, qr) + pb.hessian_apply(q, p, qa_j, qr);
      nf.eigen_drift[j] = -ar.dot(t);
    }
    return nf;
  }

  // Hopf
  const complex lam(0.0, bif.omega);
  const CVec qc = qh.conjugate();
  Factorization Jf;
  try {
    Jf = Factorization(J);
  } catch (const SingularMatrixError&) {
    throw Error(ErrorKind::resonance, "Jacobian singular at the Hopf point (zero eigenvalue present)");
  }
  ComplexFactorization R2;
  try {
    R2 = ComplexFactorization(J, pb.mass_matrix(q, p), complex(0.0, 2.0 * bif.omega));
  } catch (const SingularMatrixError&) {
    throw Error(ErrorKind::resonance, "2 i omega M + J is singular (2:1 resonance)");
  }
  const CVec h11 = hessian_apply(pb, q, p, qh, qc);
  const CVec h20 = hessian_apply(pb, q, p, qh, qh);
  const CVec x11 = Jf.solve(h11);
  const CVec x20 = R2.solve(h20);
  nf.beta = -0.5 * inner(qa, third_apply(pb, q, p, qh, qh, qc)) + inner(qa, hessian_apply(pb, q, p, qh, x11)) +
            0.5 * inner(qa, hessian_apply(pb, q, p, qc, x20));
  for (Index j = 0; j < p.size(); ++j) {
    const Vec q_alpha = -Jf.solve(pb.param_gradient(q, p, j));
    const CVec qaj = to_complex(q_alpha);
    CVec t = mixed_param_jacobian_apply(pb, q, p, j, qh) + hessian_apply(pb, q, p, qaj, qh);
    t += lam * (mass_param_gradient_apply(pb, q, p, j, qh) + mass_jacobian_apply(pb, q, p, qaj, qh));
    nf.eigen_drift[j] = -inner(qa, t);
  }
  return nf;
}

WeaklyNonlinear weakly_nonlinear_predict(const BifPoint& bif, const Vec& dalpha, Index harmonics) {
  if (!bif.normal_form) throw Error(ErrorKind::invalid_configuration, "bifurcation point has no normal form");
  const NormalForm& nf = *bif.normal_form;
  if (dalpha.size() != static_cast<Index>(nf.eigen_drift.size())) {
    throw Error(ErrorKind::dimension_mismatch, "dalpha needs one entry per parameter");
  }
  complex r = 0.0;
  for (Index j = 0; j < dalpha.size(); ++j) r += nf.eigen_drift[j] * dalpha[j];
  const bool hopf = bif.kind == BifKind::hopf;

  WeaklyNonlinear out;
  out.omega = bif.omega;
  double a2 = 0.0;
  if (dalpha.cwiseAbs().maxCoeff() > 0.0) {
    if (nf.beta.real() == 0.0) throw Error(ErrorKind::invalid_configuration, "degenerate normal form (Re beta = 0)");
    a2 = -r.real() / nf.beta.real();
    if (!(a2 > 0.0)) throw Error(ErrorKind::no_orbit, "no real amplitude on this side of the bifurcation");
  }
  out.amplitude = std::sqrt(a2);
  if (hopf) {
    FourierState s = FourierState::zeros(bif.q.size(), std::max<Index>(harmonics, 1), bif.omega);
    s.mean = bif.q;
    s.harmonics[0] = out.amplitude * bif.direct_mode;
    s.omega = bif.omega + r.imag() + nf.beta.imag() * a2;
    out.omega = s.omega;
    out.state = bif.q;
    out.orbit = std::move(s);
  } else {
    out.state = bif.q + out.amplitude * bif.direct_mode.real();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bifurcation curves

namespace {

class BifAugmented final : public AugmentedSystem {
 public:
  BifAugmented(const Problem& pb, const BifPoint& bif, Index second)
      : pb_(pb), kind_(bif.kind), base_(bif.alpha), primary_(bif.alpha.active_index()), second_(second),
        v_(bif.direct_mode), w_(bif.adjoint_mode), last_(bif) {}

  [[nodiscard]] Index core_dim() const override { return pb_.dim(); }
  [[nodiscard]] Index extra_dim() const override { return extra_count(kind_); }

  [[nodiscard]] Parameters params(const Vec& x, double mu) const {
    Parameters p = base_;
    p.set(primary_, x[pb_.dim()]);
    p.set(second_, mu);
    return p;
  }
  [[nodiscard]] double omega(const Vec& x) const { return kind_ == BifKind::hopf ? x[pb_.dim() + 1] : 0.0; }

  [[nodiscard]] Vec residual(const Vec& x, double mu) const override {
    const Index n = pb_.dim();
    const Parameters p = params(x, mu);
    const Vec q = x.head(n);
    const complex g = criticality(pb_, q, p, omega(x), v_, w_).g;
    Vec F(n + extra_dim());
    F << pb_.residual(q, p), g_part(kind_, g);
    return F;
  }

  [[nodiscard]] Linearization linearize(const Vec& x, double mu) const override {
    const Index n = pb_.dim(), k = extra_dim();
    const Parameters p = params(x, mu);
    const Vec q = x.head(n);
    const double om = omega(x);
    const Criticality c = criticality(pb_, q, p, om, v_, w_);
    const GDerivatives dg = g_derivatives(pb_, q, p, om, c.q_hat, c.q_adj);
    const BorderedSystem sys = newton_system(pb_, kind_, q, p, dg);
    Linearization lin{sys.core, sys.border_cols, sys.border_rows, sys.corner, Vec(n + k)};
    lin.dmu.head(n) = pb_.param_gradient(q, p, second_);
    lin.dmu[n] = dg.dalpha[second_].real();
    if (k == 2) lin.dmu[n + 1] = dg.dalpha[second_].imag();
    return lin;
  }

  void accept(const Vec& x, double mu) override {
    const Index n = pb_.dim();
    BifPoint b = finish_point(pb_, kind_, x.head(n), params(x, mu), omega(x), v_, w_);
    // keep the mode orientation continuous so sign tests on beta are meaningful
    if (inner(last_.direct_mode, b.direct_mode).real() < 0.0) {
      b.direct_mode = -b.direct_mode;
      b.adjoint_mode = -b.adjoint_mode;
    }
    b.converged = true;
    v_ = unit_seed(b.direct_mode);
    w_ = unit_seed(b.adjoint_mode);
    last_ = std::move(b);
  }

  [[nodiscard]] const BifPoint& last() const { return last_; }

 private:
  const Problem& pb_;
  BifKind kind_;
  Parameters base_;
  Index primary_, second_;
  CVec v_, w_;
  BifPoint last_;
};

// Tangent at the start; at a singular core the bordering falls back to unit vectors.
UnitTangent start_tangent(const Linearization& lin) {
  try {
    return augmented_tangent(lin);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::tangent_at_singularity) throw;
  }
  const Index n = lin.core.rows(), N = n + lin.corner.rows() + 1;
  std::vector<Index> order;
  for (Index i = N - 1; i >= 0; --i) order.push_back(i);
  for (Index i : order) {
    UnitTangent e;
    e.x = Vec::Zero(N - 1);
    if (i == N - 1) {
      e.mu = 1.0;
    } else {
      e.x[i] = 1.0;
    }
    try {
      return augmented_tangent(lin, &e);
    } catch (const Error&) {
    }
  }
  throw Error(ErrorKind::tangent_at_singularity, "no tangent at the starting bifurcation point");
}

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

BifCurve trace_bifurcation_curve(const Problem& pb, const BifPoint& bif, const std::string& second_param,
                                 const StepControl& control, const CurveStop& stop,
                                 const LocatorSettings& settings) {
  control.validate();
  const Index second = bif.alpha.index_of(second_param);
  if (second == bif.alpha.active_index()) {
    throw Error(ErrorKind::invalid_configuration, "second parameter must differ from the primary parameter");
  }
  const Index n = pb.dim();
  const bool hopf = bif.kind == BifKind::hopf;
  BifCurve out;
  out.primary_parameter = bif.alpha.active_name();
  out.second_parameter = second_param;

  BifAugmented sys(pb, bif, second);
  CurvePoint start;
  start.x.resize(n + extra_count(bif.kind));
  start.x.head(n) = bif.q;
  start.x[n] = bif.alpha.active_value();
  if (hopf) start.x[n + 1] = bif.omega;
  start.mu = bif.alpha[second];

  EngineSettings es;
  es.control = control;
  es.corrector = settings.newton;
  es.max_points = stop.max_points;
  es.mu_min = stop.second_min;
  es.mu_max = stop.second_max;

  auto with_form = [&](BifPoint b) {
    try {
      b.normal_form = normal_form(pb, b);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::resonance && e.kind() != ErrorKind::singular_matrix) throw;
    }
    return b;
  };
  auto det_sign = [&](const BifPoint& b) {
    try {
      return Factorization(pb.jacobian(b.q, b.alpha)).determinant_sign();
    } catch (const SingularMatrixError&) {
      return 0;
    }
  };

  std::vector<int> dets;
  const double omega0 = bif.omega;
  auto hook = [&](const CurvePoint&, const CurvePoint&) {
    out.points.push_back(with_form(sys.last()));
    const Index i = static_cast<Index>(out.points.size()) - 1;
    const BifPoint& prev = out.points[i - 1];
    const BifPoint& cur = out.points[i];
    if (prev.normal_form && cur.normal_form) {
      const int s0 = sign_of(prev.normal_form->beta.real()), s1 = sign_of(cur.normal_form->beta.real());
      if (s0 != s1 && s1 != 0) out.codim2_events.push_back({i, hopf ? "bautin" : "cusp-candidate"});
    }
    if (hopf) {
      dets.push_back(det_sign(cur));
      if (dets.size() >= 2 && dets[dets.size() - 2] * dets.back() < 0) {
        out.codim2_events.push_back({i, "fold-hopf-candidate"});
      }
      if (std::abs(cur.omega) < stop.bt_omega_fraction * std::abs(omega0)) {
        out.codim2_events.push_back({i, "bogdanov-takens-candidate"});
        return false;
      }
    }
    return true;
  };

  try {
    start.tangent = start_tangent(sys.linearize(start.x, start.mu));
    const bool flip = std::abs(start.tangent.mu) > 1e-8 ? start.tangent.mu * control.h0 < 0.0 : control.h0 < 0.0;
    if (flip) {
      start.tangent.x = -start.tangent.x;
      start.tangent.mu = -start.tangent.mu;
    }
  } catch (const Error& e) {
    out.status = TraceStatus::failed;
    out.message = e.what();
    return out;
  }
  BifPoint first = bif;
  first.converged = true;
  out.points.push_back(with_form(first));
  if (hopf) dets.push_back(det_sign(first));

  const CurveResult res = trace_curve(sys, start, es, hook);
  out.status = res.status;
  out.message = res.message;
  // trace_curve re-accepts the start point; the stored first point is the caller's.
  return out;
}

std::vector<BifPoint> locate_branch_events(const Problem& pb, const Branch& branch, const LocatorSettings& settings) {
  std::vector<BifPoint> found;
  for (const BranchEvent& ev : branch.events) {
    const BranchPoint& base = ev.point ? *ev.point : branch.points[ev.before];
    const bool hopf = ev.kind == "hopf";
    const double om = hopf ? std::abs(ev.point ? ev.lambda.imag() : ev.lambda_before.imag()) : 0.0;
    try {
      BifPoint b = locate_from_guess(pb, hopf ? BifKind::hopf : BifKind::fold, base.q, base.alpha, om, settings);
      if (!b.converged) continue;
      if (!hopf && classify_zero_eigenvalue(pb, b) == ZeroKind::pitchfork_or_branch_point) {
        b.kind = BifKind::pitchfork;
      }
      try {
        b.normal_form = normal_form(pb, b);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::resonance && e.kind() != ErrorKind::singular_matrix) throw;
      }
      found.push_back(std::move(b));
    } catch (const Error&) {
      continue;
    }
  }
  return found;
}

}  // namespace bifkit
