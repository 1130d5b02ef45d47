#include <doctest.h>

#include <cmath>

#include "bifkit/bifurcation.hpp"
#include "bifkit/error.hpp"
#include "bifkit/systems.hpp"
#include "oracles.hpp"

using namespace bifkit;

namespace {

CVec ones(Index n) { return CVec::Ones(n); }

Parameters with_active(const Problem& pb, double a) {
  Parameters p = pb.default_parameters();
  p.set_active_value(a);
  return p;
}

double mode_residual(const Problem& pb, const BifPoint& b) {
  const SparseMatrix J = pb.jacobian(b.q, b.alpha);
  const SparseMatrix M = pb.mass_matrix(b.q, b.alpha);
  const CVec r = J.cast<complex>() * b.direct_mode + complex(0.0, b.omega) * (M.cast<complex>() * b.direct_mode);
  return r.norm();
}

void check_normalized(const Problem& pb, const BifPoint& b) {
  const CVec Mq = mass_apply(pb, b.q, b.alpha, b.direct_mode);
  CHECK(std::abs(inner(b.direct_mode, Mq) - 1.0) < 1e-10);
  CHECK(std::abs(inner(b.adjoint_mode, Mq) - 1.0) < 1e-10);
}

BifPoint brusselator_hopf(const Brusselator1D& br, double L_guess) {
  Parameters p = br.default_parameters();
  p.set("L", L_guess);
  return locate_from_guess(br, BifKind::hopf, br.base_state(p), p, 2.1395);
}

double hopf_omega(double A, double B, double Dx, double Dy) {
  const double s = (A * A * Dx + (B - 1.0) * Dy) / (Dx + Dy);
  return std::sqrt(A * A * B - s * s);
}

}  // namespace

TEST_CASE("criticality: scalar hand value and vanishing at criticality") {
  auto fold = scalar_fold();
  const Criticality c = criticality(*fold, Vec::Constant(1, 0.1), with_active(*fold, -0.01), 0.0, ones(1), ones(1));
  // 1/g = <1, 0.2^-1 1> = 5
  CHECK(c.g.real() == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(std::abs(c.g.imag()) < 1e-15);
  CHECK(std::abs(c.q_hat[0] - 1.0) < 1e-14);

  double prev = 1e9;
  for (double q : {0.1, 0.01, 0.001}) {
    const double g = std::abs(criticality(*fold, Vec::Constant(1, q), with_active(*fold, -q * q), 0.0, ones(1), ones(1)).g);
    CHECK(g < prev);
    prev = g;
  }
  // exactly critical: singular core, bordered system still solvable
  CHECK(std::abs(criticality(*fold, Vec::Zero(1), with_active(*fold, 0.0), 0.0, ones(1), ones(1)).g) < 1e-15);
}

TEST_CASE("criticality rejects zero bordering vectors") {
  auto fold = scalar_fold();
  CHECK_THROWS_AS((void)criticality(*fold, Vec::Ones(1), fold->default_parameters(), 0.0, CVec::Zero(1), ones(1)),
                  Error);
}

TEST_CASE("criticality matches the dense resolvent definition") {
  auto b0 = brusselator_0d();
  Parameters p = b0->default_parameters();
  p.set("B", 4.7);
  const Vec q = b0->equilibrium(p);
  CVec v(2), w(2);
  v << complex(1.0, 0.3), complex(-0.2, 0.5);
  w << complex(0.4, -0.1), complex(0.9, 0.2);
  const double om = 1.8;
  const Mat J = Mat(b0->jacobian(q, p));
  const CMat C = J.cast<complex>() + complex(0.0, om) * CMat::Identity(2, 2);
  const complex inv_g = v.dot(C.partialPivLu().solve(w));
  const Criticality c = criticality(*b0, q, p, om, v, w);
  CHECK(std::abs(c.g - 1.0 / inv_g) < 1e-12 * std::abs(c.g));
  CHECK(std::abs(inner(v, c.q_hat) - 1.0) < 1e-12);
  CHECK(std::abs(inner(w, c.q_adj) - 1.0) < 1e-12);
}

TEST_CASE("g derivatives agree with central differences of g") {
  auto b0 = brusselator_0d();
  Parameters p = b0->default_parameters();
  p.set("B", 4.7);
  const Vec q = b0->equilibrium(p) + Vec{{0.03, -0.02}};
  CVec v(2), w(2);
  v << complex(1.0, 0.3), complex(-0.2, 0.5);
  w << complex(0.4, -0.1), complex(0.9, 0.2);
  const double om = 1.8;
  const Criticality c = criticality(*b0, q, p, om, v, w);
  const GDerivatives d = g_derivatives(*b0, q, p, om, c.q_hat, c.q_adj);
  const double h = 1e-6;
  auto rel = [](complex a, complex b) { return std::abs(a - b) / std::max(1e-12, std::abs(b)); };
  for (Index j = 0; j < 2; ++j) {
    const Vec e = h * Vec::Unit(2, j);
    const complex fd = (criticality(*b0, q + e, p, om, v, w).g - criticality(*b0, q - e, p, om, v, w).g) / (2 * h);
    CHECK(rel(d.dq[j], fd) < 1e-5);
  }
  for (Index j = 0; j < 2; ++j) {
    const complex fd = (criticality(*b0, q, p.with(j, p[j] + h), om, v, w).g -
                        criticality(*b0, q, p.with(j, p[j] - h), om, v, w).g) /
                       (2 * h);
    CHECK(rel(d.dalpha[j], fd) < 1e-5);
  }
  const complex fd = (criticality(*b0, q, p, om + h, v, w).g - criticality(*b0, q, p, om - h, v, w).g) / (2 * h);
  CHECK(rel(d.domega, fd) < 1e-5);
  // domega is <q_adj, i M q_hat>
  CHECK(std::abs(d.domega - inner(c.q_adj, complex(0.0, 1.0) * c.q_hat)) < 1e-15);
}

TEST_CASE("fold locator on scalar_fold") {
  auto fold = scalar_fold();
  const BifPoint b = locate_bifurcation(*fold, BifKind::fold, Vec::Constant(1, 0.1), with_active(*fold, -0.01), 0.0,
                                        ones(1), ones(1));
  REQUIRE(b.converged);
  CHECK(std::abs(b.q[0]) + std::abs(b.alpha[0]) < 1e-8);
  CHECK(b.omega == 0.0);
  check_normalized(*fold, b);
  CHECK(b.g_history.back() < 1e-10);
  CHECK(classify_zero_eigenvalue(*fold, b) == ZeroKind::fold);

  const NormalForm nf = normal_form(*fold, b);
  CHECK(nf.form == FormKind::quadratic);
  CHECK(std::abs(nf.eigen_drift[0] - (-1.0)) < 1e-8);
  CHECK(std::abs(nf.beta - (-1.0)) < 1e-8);
}

TEST_CASE("pitchfork locator is exact on scalar_pitchfork") {
  auto pf = scalar_pitchfork();
  const BifPoint b =
      locate_bifurcation(*pf, BifKind::pitchfork, Vec::Zero(1), with_active(*pf, 0.05), 0.0, ones(1), ones(1));
  REQUIRE(b.converged);
  CHECK(b.q[0] == 0.0);
  CHECK(b.alpha[0] == 0.0);
  CHECK(classify_zero_eigenvalue(*pf, b) == ZeroKind::pitchfork_or_branch_point);
  const NormalForm nf = normal_form(*pf, b);
  CHECK(nf.form == FormKind::cubic);
  CHECK(nf.beta.imag() == 0.0);
  CHECK(nf.beta.real() == doctest::Approx(-1.0));
  CHECK(nf.eigen_drift[0].real() == doctest::Approx(1.0));
}

TEST_CASE("classification threshold: exactly zero projection is a branch point") {
  auto pf = scalar_pitchfork();
  BifPoint b;
  b.kind = BifKind::fold;
  b.q = Vec::Zero(1);
  b.alpha = with_active(*pf, 0.0);
  b.direct_mode = ones(1);
  b.adjoint_mode = ones(1);
  CHECK(classify_zero_eigenvalue(*pf, b, 0.0) == ZeroKind::pitchfork_or_branch_point);
}

TEST_CASE("brusselator_1d(201) Hopf points for k = 1, 2") {
  auto br = brusselator_1d(201);
  for (int k : {1, 2}) {
    const BifPoint b = brusselator_hopf(*br, 0.5 * k);
    REQUIRE(b.converged);
    CHECK(b.alpha.get("L") == doctest::Approx(0.51302 * k).epsilon(0.01));
    CHECK(b.omega == doctest::Approx(2.1395).epsilon(0.01));
    CHECK(b.omega > 0.0);
    CHECK(b.g_history.back() < 1e-8);
    CHECK(b.residual_history.back() < 1e-8);
    CHECK(b.g_history.back() < b.g_history.front());
    check_normalized(*br, b);
    CHECK(mode_residual(*br, b) < 1e-7);
  }
}

TEST_CASE("brusselator_0d Hopf: drift against the tracked eigenvalue, observable criticality") {
  auto b0 = brusselator_0d();
  Parameters p = b0->default_parameters();
  p.set("B", 4.9);
  BifPoint b = locate_from_guess(*b0, BifKind::hopf, b0->equilibrium(p), p, 2.0);
  REQUIRE(b.converged);
  CHECK(b.alpha.get("B") == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(b.omega == doctest::Approx(2.0).epsilon(1e-10));
  const NormalForm nf = normal_form(*b0, b);
  b.normal_form = nf;

  const double h = 1e-4;
  for (const char* name : {"A", "B"}) {
    const Index j = b.alpha.index_of(name);
    const Parameters pp = b.alpha.with(j, b.alpha[j] + h), pm = b.alpha.with(j, b.alpha[j] - h);
    const complex target(0.0, b.omega);
    const complex fd = (oracle::tracked_eigenvalue(*b0, b0->equilibrium(pp), pp, target) -
                        oracle::tracked_eigenvalue(*b0, b0->equilibrium(pm), pm, target)) /
                       (2 * h);
    CHECK(std::abs(nf.eigen_drift[j] - fd) < 1e-4 * std::abs(fd));
  }
  CHECK(std::abs(nf.eigen_drift[1] - 0.5) < 1e-10);

  // Stable small cycle for B slightly above 5, amplitude from the normal form.
  CHECK(nf.supercritical());
  Parameters pa = b.alpha;
  pa.set("B", 5.05);
  const WeaklyNonlinear wn = weakly_nonlinear_predict(b, Vec{{0.0, 0.05}});
  const double predicted = 2.0 * wn.amplitude * std::abs(b.direct_mode[0]);
  const Vec eq = b0->equilibrium(pa);
  const auto small = oracle::measure(*b0, pa, eq + Vec{{0.01, 0.0}}, 0, 0.01, 800.0, 20.0);
  const auto large = oracle::measure(*b0, pa, eq + Vec{{0.3, 0.0}}, 0, 0.01, 800.0, 20.0);
  CHECK(small.amplitude == doctest::Approx(large.amplitude).epsilon(0.01));
  CHECK(small.amplitude == doctest::Approx(predicted).epsilon(0.1));
  CHECK(2.0 * M_PI / small.period == doctest::Approx(wn.omega).epsilon(0.01));
}

TEST_CASE("weakly nonlinear predictor algebra") {
  BifPoint b;
  b.kind = BifKind::hopf;
  b.q = Vec::Zero(2);
  b.omega = 1.0;
  b.direct_mode = CVec::Ones(2);
  b.adjoint_mode = CVec::Ones(2);
  NormalForm nf;
  nf.form = FormKind::cubic;
  nf.eigen_drift = {complex(2.0, 0.0)};
  nf.beta = complex(-0.5, 0.0);
  b.normal_form = nf;
  // |A|^2 = -(2 * 0.01) / (-0.5)
  CHECK(weakly_nonlinear_predict(b, Vec{{0.01}}).amplitude == doctest::Approx(std::sqrt(0.04)));
  CHECK(weakly_nonlinear_predict(b, Vec{{0.0}}).amplitude == 0.0);
  try {
    (void)weakly_nonlinear_predict(b, Vec{{-0.01}});
    FAIL("expected no_orbit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::no_orbit);
  }
  const WeaklyNonlinear w = weakly_nonlinear_predict(b, Vec{{0.01}}, 3);
  REQUIRE(w.orbit);
  CHECK(w.orbit->order() == 3);
  CHECK(std::abs(w.orbit->harmonics[0][0] - complex(0.2, 0.0)) < 1e-14);
}

TEST_CASE("scalar_fold predictor: equilibria of the quadratic form") {
  auto fold = scalar_fold();
  BifPoint b = locate_bifurcation(*fold, BifKind::fold, Vec::Constant(1, 0.1), with_active(*fold, -0.01), 0.0,
                                  ones(1), ones(1));
  b.normal_form = normal_form(*fold, b);
  const WeaklyNonlinear w = weakly_nonlinear_predict(b, Vec{{-0.04}});
  // q^2 = 0.04 exactly for this normal form
  CHECK(w.amplitude == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(std::abs(w.state[0]) == doctest::Approx(0.2).epsilon(1e-8));
  CHECK_THROWS_AS((void)weakly_nonlinear_predict(b, Vec{{0.04}}), Error);
}

TEST_CASE("brusselator_1d predictor seed scales like sqrt(dL)") {
  auto br = brusselator_1d(101);
  BifPoint b = brusselator_hopf(*br, 0.5);
  REQUIRE(b.converged);
  b.normal_form = normal_form(*br, b);
  const Index L = b.alpha.index_of("L");
  double prev = 0.0;
  for (double dL : {1e-4, 4e-4, 1.6e-3}) {
    Vec d = Vec::Zero(b.alpha.size());
    d[L] = dL;
    const double a = weakly_nonlinear_predict(b, d).amplitude;
    if (prev > 0.0) CHECK(a / prev == doctest::Approx(2.0).epsilon(1e-6));
    prev = a;
  }
}

TEST_CASE("scalar_cusp fold curve through the cusp") {
  auto cusp = scalar_cusp();
  Parameters p = cusp->default_parameters();  // active a1
  p.set("a2", -0.75);
  p.set("a1", 0.26);
  const BifPoint b = locate_bifurcation(*cusp, BifKind::fold, Vec::Constant(1, 0.48), p, 0.0, ones(1), ones(1));
  REQUIRE(b.converged);
  CHECK(b.alpha.get("a1") == doctest::Approx(0.25).epsilon(1e-10));

  StepControl ctl;
  ctl.h0 = 0.02;
  ctl.h_max = 0.05;
  CurveStop stop;
  stop.max_points = 60;
  const BifCurve c = trace_bifurcation_curve(*cusp, b, "a2", ctl, stop);
  REQUIRE(c.points.size() == 60);
  double qmin = 1e9;
  for (const BifPoint& pt : c.points) {
    const double a1 = pt.alpha.get("a1"), a2 = pt.alpha.get("a2");
    CHECK(std::abs(4 * a2 * a2 * a2 + 27 * a1 * a1) < 1e-6 * (1 + std::abs(a2 * a2 * a2)));
    qmin = std::min(qmin, pt.q[0]);
  }
  CHECK(qmin < -0.2);
  int cusps = 0;
  for (const auto& e : c.codim2_events) {
    CHECK(e.type == "cusp-candidate");
    ++cusps;
    const BifPoint& after = c.points[static_cast<std::size_t>(e.index)];
    const BifPoint& before = c.points[static_cast<std::size_t>(e.index - 1)];
    CHECK(before.q[0] * after.q[0] <= 0.0);
  }
  CHECK(cusps == 1);
}

TEST_CASE("curve from the cusp point itself, both directions") {
  auto cusp = scalar_cusp();
  BifPoint b = locate_bifurcation(*cusp, BifKind::fold, Vec::Zero(1), cusp->default_parameters(), 0.0, ones(1),
                                  ones(1));
  REQUIRE(b.converged);
  for (double h0 : {0.02, -0.02}) {
    StepControl ctl;
    ctl.h0 = h0;
    CurveStop stop;
    stop.max_points = 10;
    const BifCurve c = trace_bifurcation_curve(*cusp, b, "a2", ctl, stop);
    REQUIRE(c.points.size() == 10);
    CHECK(c.points.back().q[0] * h0 > 0.0);
    for (const BifPoint& pt : c.points) {
      const double a1 = pt.alpha.get("a1"), a2 = pt.alpha.get("a2");
      CHECK(std::abs(4 * a2 * a2 * a2 + 27 * a1 * a1) < 1e-6 * (1 + std::abs(a2 * a2 * a2)));
    }
  }
}

TEST_CASE("brusselator_1d Hopf curve over (L, B) follows the analytic frequency") {
  auto br = brusselator_1d(201);
  const BifPoint b = brusselator_hopf(*br, 0.5);
  REQUIRE(b.converged);
  StepControl ctl;
  ctl.h0 = 0.05;
  ctl.h_max = 0.1;
  CurveStop stop;
  stop.max_points = 8;
  const BifCurve c = trace_bifurcation_curve(*br, b, "B", ctl, stop);
  REQUIRE(c.points.size() == 8);
  CHECK(c.points.back().alpha.get("B") > 5.5);
  for (const BifPoint& pt : c.points) {
    const Parameters& a = pt.alpha;
    CHECK(pt.omega == doctest::Approx(hopf_omega(a.get("A"), a.get("B"), a.get("D_X"), a.get("D_Y"))).epsilon(0.01));
    REQUIRE(pt.normal_form);
    CHECK(pt.normal_form->beta.real() < 0.0);
  }
  CHECK(c.codim2_events.empty());
}

TEST_CASE("single-point curve") {
  auto cusp = scalar_cusp();
  const BifPoint b = locate_bifurcation(*cusp, BifKind::fold, Vec::Zero(1), cusp->default_parameters(), 0.0, ones(1),
                                        ones(1));
  StepControl ctl;
  CurveStop stop;
  stop.max_points = 1;
  CHECK(trace_bifurcation_curve(*cusp, b, "a2", ctl, stop).points.size() == 1);
  CHECK_THROWS_AS((void)trace_bifurcation_curve(*cusp, b, "a1", ctl, stop), Error);
}

TEST_CASE("hopf locate on a real eigenvalue reports reclassification") {
  auto fold = scalar_fold();
  try {
    (void)locate_bifurcation(*fold, BifKind::hopf, Vec::Constant(1, 0.1), with_active(*fold, -0.01), 1e-3, ones(1),
                             ones(1));
    FAIL("expected reclassify_candidate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::reclassify_candidate);
  }
}
