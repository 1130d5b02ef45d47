#include "bifkit/hb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bifkit/error.hpp"
#include "bifkit/linalg.hpp"
#include "bifkit/stability.hpp"

namespace bifkit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_hb(const Problem& pb) {
  if (!pb.hb_capable()) {
    throw Error(ErrorKind::unsupported_problem,
                pb.name() + " is not polynomial of degree <= 3; introduce auxiliary variables first");
  }
  if (!pb.constant_mass()) {
    throw Error(ErrorKind::unsupported_problem, pb.name() + " has a state-dependent mass; harmonic balance needs M(alpha) only");
  }
}

void require_shape(const Problem& pb, const FourierState& fs) {
  if (fs.mean.size() != pb.dim()) throw Error(ErrorKind::dimension_mismatch, "Fourier state dimension");
  for (const CVec& h : fs.harmonics) {
    if (h.size() != pb.dim()) throw Error(ErrorKind::dimension_mismatch, "harmonic dimension");
  }
}

// q_m for m in [-N, N]; q_{-m} = conj(q_m).
CVec harmonic(const FourierState& fs, Index m) {
  if (m == 0) return fs.mean.cast<complex>();
  if (m > 0) return fs.harmonics[static_cast<std::size_t>(m - 1)];
  return fs.harmonics[static_cast<std::size_t>(-m - 1)].conjugate();
}

Index re_off(Index n, Index k) { return n * (2 * k - 1); }
Index im_off(Index n, Index k) { return n * (2 * k); }

void add_block(std::vector<Triplet>& t, const SparseMatrix& A, Index r0, Index c0, double s) {
  if (s == 0.0) return;
  for (Index c = 0; c < A.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(A, c); it; ++it) t.emplace_back(r0 + it.row(), c0 + it.col(), s * it.value());
  }
}

void add_column(std::vector<Triplet>& t, const Vec& v, Index r0, Index c) {
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) t.emplace_back(r0 + i, c, v[i]);
  }
}

// Fourier coefficients A_k, k = 0..K, of t -> dR/dq(q(t)), from S >= 4N + 1
// samples. Exact for cubic R, where the Jacobian carries harmonics up to 2N.
struct PeriodicJacobian {
  std::vector<SparseMatrix> re, im;
};

PeriodicJacobian periodic_jacobian(const Problem& pb, const FourierState& fs, const Parameters& p, Index K) {
  const Index N = fs.order(), n = pb.dim(), S = 4 * N + 1;
  PeriodicJacobian A;
  A.re.assign(static_cast<std::size_t>(K + 1), SparseMatrix(n, n));
  A.im.assign(static_cast<std::size_t>(K + 1), SparseMatrix(n, n));
  for (Index s = 0; s < S; ++s) {
    const double theta = kTwoPi * static_cast<double>(s) / static_cast<double>(S);
    const SparseMatrix Js = pb.jacobian(sample_time(fs, theta / fs.omega), p);
    for (Index k = 0; k <= K; ++k) {
      const double c = std::cos(static_cast<double>(k) * theta) / static_cast<double>(S);
      const double sn = std::sin(static_cast<double>(k) * theta) / static_cast<double>(S);
      A.re[static_cast<std::size_t>(k)] += c * Js;
      if (k > 0) A.im[static_cast<std::size_t>(k)] -= sn * Js;
    }
  }
  for (auto& m : A.re) m.prune(0.0);
  for (auto& m : A.im) m.prune(0.0);
  return A;
}

// Packed real linearization (residual rows only). K limits the coupling
// |n - m| between harmonics.
SparseMatrix assemble(const Problem& pb, const FourierState& fs, const Parameters& p, Index K, bool omega_column) {
  const Index n = pb.dim(), N = fs.order(), dim = n * (2 * N + 1);
  const PeriodicJacobian A = periodic_jacobian(pb, fs, p, K);
  const SparseMatrix M = pb.mass_matrix(fs.mean, p);
  std::vector<Triplet> t;

  // A_k = Ar_|k| + i sign(k) Ai_|k|; zero beyond K.
  auto ar = [&](Index k) -> const SparseMatrix* {
    k = std::abs(k);
    return k <= K ? &A.re[static_cast<std::size_t>(k)] : nullptr;
  };
  auto ai = [&](Index k, double& sign) -> const SparseMatrix* {
    sign = k < 0 ? -1.0 : 1.0;
    k = std::abs(k);
    return k <= K && k > 0 ? &A.im[static_cast<std::size_t>(k)] : nullptr;
  };
  auto put_re = [&](Index k, Index r0, Index c0, double s) {
    if (const SparseMatrix* a = ar(k)) add_block(t, *a, r0, c0, s);
  };
  auto put_im = [&](Index k, Index r0, Index c0, double s) {
    double sg = 1.0;
    if (const SparseMatrix* a = ai(k, sg)) add_block(t, *a, r0, c0, s * sg);
  };

  for (Index row = 0; row <= N; ++row) {
    const Index rr = row == 0 ? 0 : re_off(n, row), ri = row == 0 ? -1 : im_off(n, row);
    // column block q_0: A_row
    put_re(row, rr, 0, 1.0);
    if (row > 0) put_im(row, ri, 0, 1.0);
    for (Index m = 1; m <= N; ++m) {
      const Index cr = re_off(n, m), ci = im_off(n, m);
      // d/dRe q_m: A_{row-m} + A_{row+m};  d/dIm q_m: i (A_{row-m} - A_{row+m})
      put_re(row - m, rr, cr, 1.0);
      put_re(row + m, rr, cr, 1.0);
      put_im(row - m, rr, ci, -1.0);
      put_im(row + m, rr, ci, 1.0);
      if (row > 0) {
        put_im(row - m, ri, cr, 1.0);
        put_im(row + m, ri, cr, 1.0);
        put_re(row - m, ri, ci, 1.0);
        put_re(row + m, ri, ci, -1.0);
      }
    }
    if (row > 0) {
      const double w = static_cast<double>(row) * fs.omega;
      add_block(t, M, rr, im_off(n, row), -w);
      add_block(t, M, ri, re_off(n, row), w);
      if (omega_column) {
        const CVec& qk = fs.harmonics[static_cast<std::size_t>(row - 1)];
        const double k = static_cast<double>(row);
        add_column(t, Vec(-k * (M * qk.imag())), rr, dim);
        add_column(t, Vec(k * (M * qk.real())), ri, dim);
      }
    }
  }
  SparseMatrix J(dim, dim + (omega_column ? 1 : 0));
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

FourierState resized(const FourierState& fs, Index N) {
  FourierState out = fs;
  out.harmonics.resize(static_cast<std::size_t>(N), CVec::Zero(fs.dim()));
  return out;
}

double harmonic_norm(const FourierState& fs) {
  double s = 0.0;
  for (const CVec& h : fs.harmonics) s += h.squaredNorm();
  return std::sqrt(s);
}

Vec full_residual(const Problem& pb, const FourierState& fs, const FourierState& ref, const Parameters& p) {
  const Vec r = pack_residual(hb_residual(pb, fs, p));
  Vec out(r.size() + 1);
  out << r, phase_constraint(pb, fs, ref, p).value;
  return out;
}

SparseMatrix full_jacobian(const Problem& pb, const FourierState& fs, const FourierState& ref, const Parameters& p) {
  const SparseMatrix J = assemble(pb, fs, p, 2 * fs.order(), true);
  const Vec row = phase_constraint(pb, fs, ref, p).row;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(J.nonZeros() + row.size()));
  for (Index c = 0; c < J.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(J, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  for (Index i = 0; i < row.size(); ++i) {
    if (row[i] != 0.0) t.emplace_back(J.rows(), i, row[i]);
  }
  SparseMatrix F(J.rows() + 1, J.cols());
  F.setFromTriplets(t.begin(), t.end());
  return F;
}

}  // namespace

Vec sample_time(const FourierState& fs, double t) {
  Vec q = fs.mean;
  for (Index k = 1; k <= fs.order(); ++k) {
    const complex e = std::polar(1.0, static_cast<double>(k) * fs.omega * t);
    q += 2.0 * (fs.harmonics[static_cast<std::size_t>(k - 1)] * e).real();
  }
  return q;
}

HarmonicResidual hb_residual(const Problem& pb, const FourierState& fs, const Parameters& p) {
  require_hb(pb);
  require_shape(pb, fs);
  const Index N = fs.order(), n = pb.dim();
  const int deg = pb.polynomial_degree();
  const Vec& q0 = fs.mean;
  const SparseMatrix J = pb.jacobian(q0, p);
  const SparseMatrix M = pb.mass_matrix(q0, p);
  std::vector<CVec> qs(static_cast<std::size_t>(2 * N + 1));
  for (Index m = -N; m <= N; ++m) qs[static_cast<std::size_t>(m + N)] = harmonic(fs, m);
  auto Q = [&](Index m) -> const CVec& { return qs[static_cast<std::size_t>(m + N)]; };

  HarmonicResidual out;
  out.harmonics.resize(static_cast<std::size_t>(N));
  for (Index k = 0; k <= N; ++k) {
    CVec F = CVec::Zero(n);
    if (k == 0) {
      F = pb.residual(q0, p).cast<complex>();
    } else {
      F = J.cast<complex>() * Q(k) + complex(0.0, static_cast<double>(k) * fs.omega) * (M.cast<complex>() * Q(k));
    }
    for (Index a = -N; a <= N; ++a) {
      if (a == 0) continue;
      if (deg >= 2) {
        const Index b = k - a;
        if (b != 0 && std::abs(b) <= N) F += 0.5 * hessian_apply(pb, q0, p, Q(a), Q(b));
      }
      if (deg >= 3) {
        for (Index b = -N; b <= N; ++b) {
          const Index c = k - a - b;
          if (b == 0 || c == 0 || std::abs(c) > N) continue;
          F += third_apply(pb, q0, p, Q(a), Q(b), Q(c)) / 6.0;
        }
      }
    }
    if (k == 0) {
      out.mean = F.real();
    } else {
      out.harmonics[static_cast<std::size_t>(k - 1)] = std::move(F);
    }
  }
  return out;
}

Vec pack_residual(const HarmonicResidual& r) {
  const Index n = r.mean.size(), N = static_cast<Index>(r.harmonics.size());
  Vec x(n * (2 * N + 1));
  x.head(n) = r.mean;
  for (Index k = 1; k <= N; ++k) {
    x.segment(re_off(n, k), n) = r.harmonics[static_cast<std::size_t>(k - 1)].real();
    x.segment(im_off(n, k), n) = r.harmonics[static_cast<std::size_t>(k - 1)].imag();
  }
  return x;
}

PhaseConstraint phase_constraint(const Problem& pb, const FourierState& fs, const FourierState& reference,
                                 const Parameters& p) {
  const Index n = pb.dim(), N = fs.order();
  if (harmonic_norm(reference) == 0.0) {
    throw Error(ErrorKind::degenerate_phase, "phase reference has no harmonic content");
  }
  const SparseMatrix M = pb.mass_matrix(reference.mean, p);
  PhaseConstraint pc;
  pc.row = Vec::Zero(n * (2 * N + 1) + 1);
  for (Index k = 1; k <= std::min(N, reference.order()); ++k) {
    // d F_k / d omega = i k M q_k (reference); Re <i k M q_ref, q>
    const CVec u = M.cast<complex>() * reference.harmonics[static_cast<std::size_t>(k - 1)];
    const double kk = static_cast<double>(k);
    pc.row.segment(re_off(n, k), n) = -kk * u.imag();
    pc.row.segment(im_off(n, k), n) = kk * u.real();
  }
  pc.value = pc.row.dot(fs.pack());
  return pc;
}

SparseMatrix hb_jacobian(const Problem& pb, const FourierState& fs, const Parameters& p) {
  require_hb(pb);
  require_shape(pb, fs);
  return assemble(pb, fs, p, 2 * fs.order(), true);
}

Vec hb_param_gradient(const Problem& pb, const FourierState& fs, const Parameters& p, Index j) {
  require_hb(pb);
  const Index n = pb.dim(), N = fs.order(), S = 4 * N + 1;
  std::vector<CVec> G(static_cast<std::size_t>(N + 1), CVec::Zero(n));
  // dR/dalpha(q(t)) has harmonics up to 3N; S > 4N keeps k <= N alias-free.
  for (Index s = 0; s < S; ++s) {
    const double theta = kTwoPi * static_cast<double>(s) / static_cast<double>(S);
    const Vec g = pb.param_gradient(sample_time(fs, theta / fs.omega), p, j);
    for (Index k = 0; k <= N; ++k) {
      G[static_cast<std::size_t>(k)] += g.cast<complex>() * std::polar(1.0 / static_cast<double>(S), -static_cast<double>(k) * theta);
    }
  }
  HarmonicResidual r;
  r.mean = G[0].real();
  for (Index k = 1; k <= N; ++k) {
    CVec v = G[static_cast<std::size_t>(k)];
    v += complex(0.0, static_cast<double>(k) * fs.omega) *
         mass_param_gradient_apply(pb, fs.mean, p, j, fs.harmonics[static_cast<std::size_t>(k - 1)]);
    r.harmonics.push_back(std::move(v));
  }
  return pack_residual(r);
}

void HBSettings::validate() const {
  if (order < 1) throw Error(ErrorKind::invalid_configuration, "harmonic balance order must be >= 1");
  newton.validate();
}

HBResult hb_solve(const Problem& pb, const FourierState& guess, const Parameters& p, const HBSettings& settings) {
  settings.validate();
  require_hb(pb);
  check_dimensions(pb, guess.mean, p);
  require_shape(pb, guess);
  const Index n = pb.dim(), N = settings.order;
  HBResult res;
  const FourierState g = resized(guess, N);
  res.state = g;
  if (harmonic_norm(g) <= settings.collapse_tol * std::max(1.0, g.mean.norm())) {
    res.collapsed = true;
    res.message = "collapsed to steady state: the guess has no harmonic content";
    return res;
  }
  const FourierState ref = settings.phase_reference ? resized(*settings.phase_reference, N) : g;

  NewtonCallbacks cb;
  cb.residual = [&](const Vec& x) { return full_residual(pb, FourierState::unpack(x, n, N), ref, p); };
  cb.step = [&](const Vec& x, const Vec& r) -> Vec {
    try {
      return Factorization(full_jacobian(pb, FourierState::unpack(x, n, N), ref, p)).solve(r);
    } catch (const SingularMatrixError& e) {
      throw SingularJacobianError(x, e.what());
    }
  };
  NewtonResult nr;
  try {
    nr = newton_iterate(cb, g.pack(), settings.newton);
  } catch (const SingularJacobianError& e) {
    res.message = e.what();
    return res;
  }
  res.iterations = nr.iterations;
  res.residual_history = nr.residual_history;
  res.message = nr.message;
  FourierState s = FourierState::unpack(nr.q, n, N);
  if (s.omega < 0.0) {
    s.omega = -s.omega;
    for (CVec& h : s.harmonics) h = h.conjugate();
  }
  res.state = s;
  res.converged = nr.converged;
  if (harmonic_norm(s) <= settings.collapse_tol * std::max(1.0, s.mean.norm())) {
    res.collapsed = true;
    res.converged = false;
    res.message = "collapsed to steady state";
  } else if (res.converged && !(s.omega > 0.0)) {
    res.converged = false;
    res.message = "frequency collapsed to zero";
  }
  return res;
}

namespace {

class HBSystem final : public AugmentedSystem {
 public:
  HBSystem(const Problem& pb, Parameters p, const FourierState& ref) : pb_(pb), p_(std::move(p)), ref_(ref) {}

  [[nodiscard]] Index core_dim() const override { return pb_.dim() * (2 * ref_.order() + 1) + 1; }
  [[nodiscard]] Parameters params(double mu) const { return p_.with(p_.active_index(), mu); }
  [[nodiscard]] FourierState state(const Vec& x) const { return FourierState::unpack(x, pb_.dim(), ref_.order()); }

  [[nodiscard]] Vec residual(const Vec& x, double mu) const override {
    return full_residual(pb_, state(x), ref_, params(mu));
  }
  [[nodiscard]] Linearization linearize(const Vec& x, double mu) const override {
    const Parameters p = params(mu);
    const FourierState s = state(x);
    Linearization lin;
    lin.core = full_jacobian(pb_, s, ref_, p);
    lin.cols.resize(core_dim(), 0);
    lin.rows.resize(0, core_dim());
    lin.corner.resize(0, 0);
    lin.dmu = Vec::Zero(core_dim());
    lin.dmu.head(core_dim() - 1) = hb_param_gradient(pb_, s, p, p_.active_index());
    return lin;
  }
  void accept(const Vec& x, double /*mu*/) override { ref_ = state(x); }

 private:
  const Problem& pb_;
  Parameters p_;
  FourierState ref_;
};

}  // namespace

HBBranch hb_trace_branch(const Problem& pb, const FourierState& start, const Parameters& p, const StepControl& control,
                         const StopCriteria& stop, const NewtonSettings& corrector) {
  require_hb(pb);
  check_dimensions(pb, start.mean, p);
  if (harmonic_norm(start) == 0.0) throw Error(ErrorKind::degenerate_phase, "start orbit has no harmonic content");
  HBSystem sys(pb, p, start);
  EngineSettings es;
  es.control = control;
  es.corrector = corrector;
  es.max_points = stop.max_points;
  es.mu_min = stop.param_min;
  es.mu_max = stop.param_max;
  CurvePoint c0;
  c0.x = start.pack();
  c0.mu = p.active_value();
  const CurveResult r = trace_curve(sys, c0, es);

  HBBranch out;
  out.active_parameter = p.active_name();
  out.status = r.status;
  out.message = r.message;
  for (const CurvePoint& cp : r.points) {
    HBPoint hp;
    hp.state = sys.state(cp.x);
    hp.alpha = sys.params(cp.mu);
    hp.period = hp.state.period();
    hp.step = cp.step;
    hp.iterations = cp.iterations;
    out.points.push_back(std::move(hp));
  }
  return out;
}

std::pair<SparseMatrix, SparseMatrix> hill_operator(const Problem& pb, const FourierState& fs, const Parameters& p) {
  require_hb(pb);
  require_shape(pb, fs);
  const Index n = pb.dim(), N = fs.order(), dim = n * (2 * N + 1);
  SparseMatrix H = assemble(pb, fs, p, N, false);
  const SparseMatrix M = pb.mass_matrix(fs.mean, p);
  std::vector<Triplet> t;
  for (Index b = 0; b < 2 * N + 1; ++b) add_block(t, M, b * n, b * n, 1.0);
  SparseMatrix MM(dim, dim);
  MM.setFromTriplets(t.begin(), t.end());
  return {std::move(H), std::move(MM)};
}

namespace {

// Packed coefficients of the orbit's time derivative (i k omega q_k).
Vec time_derivative(const FourierState& fs) {
  FourierState d = FourierState::zeros(fs.dim(), fs.order(), fs.omega);
  for (Index k = 1; k <= fs.order(); ++k) {
    d.harmonics[static_cast<std::size_t>(k - 1)] =
        complex(0.0, static_cast<double>(k) * fs.omega) * fs.harmonics[static_cast<std::size_t>(k - 1)];
  }
  const Vec x = d.pack();
  return x.head(x.size() - 1);
}

}  // namespace

double phase_mode_residual(const Problem& pb, const FourierState& fs, const Parameters& p) {
  const auto [H, M] = hill_operator(pb, fs, p);
  const Vec d = time_derivative(fs);
  return (H * d).norm() / d.norm();
}

std::vector<FloquetPair> floquet(const Problem& pb, const FourierState& fs, const Parameters& p, complex shift,
                                 Index nev) {
  const auto [H, M] = hill_operator(pb, fs, p);
  const Index n = pb.dim(), N = fs.order();
  EigsSettings es;
  es.shift = shift;
  es.nev = nev;
  std::vector<EigenPair> pairs;
  try {
    pairs = eigs_pencil(H, M, es);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::singular_shift) throw;
    es.shift += complex(1e-9 * std::max(1.0, fs.omega), 0.0);
    pairs = eigs_pencil(H, M, es);
  }
  const Vec d = time_derivative(fs);
  const CVec dc = d.cast<complex>();
  std::vector<FloquetPair> out;
  Index best = -1;
  double best_align = 0.0;
  for (const EigenPair& ep : pairs) {
    FloquetPair fp;
    fp.exponent = ep.lambda;
    fp.principal = std::abs(ep.lambda.imag()) <= 0.5 * fs.omega;
    fp.residual_norm = ep.residual_norm;
    const CVec& x = ep.direct_mode;
    fp.mode.push_back(x.head(n));
    for (Index k = 1; k <= N; ++k) {
      const CVec r = x.segment(re_off(n, k), n), s = x.segment(im_off(n, k), n);
      fp.mode.push_back(r + complex(0.0, 1.0) * s);
      fp.mode.push_back(r - complex(0.0, 1.0) * s);
    }
    fp.alignment = std::abs(dc.dot(x)) / (dc.norm() * x.norm());
    if (fp.alignment > best_align) {
      best_align = fp.alignment;
      best = static_cast<Index>(out.size());
    }
    out.push_back(std::move(fp));
  }
  if (best >= 0 && best_align > 0.5) out[static_cast<std::size_t>(best)].phase_mode = true;
  return out;
}

}  // namespace bifkit
