#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "bifkit/derivcheck.hpp"
#include "bifkit/error.hpp"
#include "bifkit/systems.hpp"

using namespace bifkit;

namespace {

Vec random_vec(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

// Scalar fold with a Jacobian that is off by a factor of 2.
class WrongJacobian final : public Problem {
 public:
  std::string name() const override { return "wrong"; }
  Index dim() const override { return 1; }
  Parameters default_parameters() const override { return Parameters({"a1"}, Vec::Constant(1, -1.0)); }
  int polynomial_degree() const override { return 2; }
  Vec residual(const Vec& q, const Parameters& p) const override {
    return Vec::Constant(1, q[0] * q[0] + p[0]);
  }
  SparseMatrix jacobian(const Vec& q, const Parameters&) const override {
    SparseMatrix J(1, 1);
    J.insert(0, 0) = 4.0 * q[0];
    return J;
  }
  Vec param_gradient(const Vec&, const Parameters&, Index) const override { return Vec::Ones(1); }
  Vec hessian_apply(const Vec&, const Parameters&, const Vec& u, const Vec& v) const override {
    return Vec::Constant(1, 4.0 * u[0] * v[0]);
  }
  Vec third_apply(const Vec&, const Parameters&, const Vec&, const Vec&, const Vec&) const override {
    return Vec::Zero(1);
  }
  Vec mixed_param_jacobian_apply(const Vec&, const Parameters&, Index, const Vec&) const override {
    return Vec::Zero(1);
  }
};

}  // namespace

TEST_CASE("brusselator_1d rejects fewer than three grid points") {
  CHECK_THROWS_AS(Brusselator1D(2), Error);
  try {
    Brusselator1D bad(2);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_configuration);
  }
}

TEST_CASE("brusselator_1d base state is an equilibrium for any L") {
  auto pb = brusselator_1d(51);
  CHECK(pb->dim() == 98);
  Parameters p = pb->default_parameters();
  CHECK(p.active_name() == "L");
  for (double L : {0.1, 0.51302, 2.0, 7.5}) {
    p.set("L", L);
    CHECK(pb->residual(pb->base_state(p), p).lpNorm<Eigen::Infinity>() < 1e-13);
  }
}

TEST_CASE("brusselator_1d Hopf pair of the base state near L = 0.51302") {
  auto pb = brusselator_1d(201);
  Parameters p = pb->default_parameters();
  p.set("L", 0.51302);
  // Eigenvalues of q' = -R(q): growth rates are eigenvalues of -J.
  const Mat J = Mat(pb->jacobian(pb->base_state(p), p));
  Eigen::EigenSolver<Mat> es(-J);
  double best_sigma = 1e9, best_omega = 0.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const complex l = es.eigenvalues()[i];
    if (l.real() > -best_sigma && std::abs(l.imag()) > 0.1 && std::abs(l.real()) < std::abs(best_sigma)) {
      best_sigma = l.real();
      best_omega = std::abs(l.imag());
    }
  }
  CHECK(std::abs(best_sigma) < 0.01);
  CHECK(best_omega == doctest::Approx(2.1395).epsilon(0.01));
}

TEST_CASE("brusselator_0d equilibrium and Hopf at B = 5") {
  auto pb = brusselator_0d();
  Parameters p = pb->default_parameters();
  p.set("B", 5.0);
  const Vec q = pb->equilibrium(p);
  CHECK(q[0] == doctest::Approx(2.0));
  CHECK(q[1] == doctest::Approx(2.5));
  CHECK(pb->residual(q, p).norm() < 1e-14);
  const Mat J = Mat(pb->jacobian(q, p));
  // trace B - 1 - A^2 = 0 and det = A^2 for the growth-rate matrix -J.
  CHECK(std::abs((-J).trace()) < 1e-14);
  CHECK(std::sqrt(J.determinant()) == doctest::Approx(2.0));
}

TEST_CASE("scalar systems: known equilibria") {
  auto fold = scalar_fold();
  Parameters p = fold->default_parameters();
  CHECK(p[0] == -1.0);
  CHECK(fold->residual(Vec::Constant(1, 1.0), p).norm() == 0.0);
  CHECK(fold->residual(Vec::Constant(1, -1.0), p).norm() == 0.0);

  auto pf = scalar_pitchfork();
  Parameters pp = pf->default_parameters();
  for (double a : {-2.0, 0.0, 3.0}) {
    pp.set(0, a);
    CHECK(pf->residual(Vec::Zero(1), pp).norm() == 0.0);
  }

  // Fold locus of the cusp: R = 0 and 3q^2 + a2 = 0 imply 4 a2^3 + 27 a1^2 = 0.
  auto cusp = scalar_cusp();
  Parameters pc = cusp->default_parameters();
  for (double q : {-1.3, -0.4, 0.2, 0.9}) {
    const double a2 = -3.0 * q * q;
    const double a1 = -(q * q * q + a2 * q);
    pc.set("a1", a1);
    pc.set("a2", a2);
    const Vec qq = Vec::Constant(1, q);
    CHECK(std::abs(cusp->residual(qq, pc)[0]) < 1e-14);
    CHECK(std::abs(Mat(cusp->jacobian(qq, pc))(0, 0)) < 1e-14);
    CHECK(std::abs(4 * a2 * a2 * a2 + 27 * a1 * a1) < 1e-12);
  }
}

TEST_CASE("check_derivatives on brusselator_1d(41) at the base state") {
  auto pb = brusselator_1d(41);
  Parameters p = pb->default_parameters();
  const DerivativeReport rep = check_derivatives(*pb, pb->base_state(p), p);
  for (const auto& e : rep.entries) {
    INFO(e.callback);
    CHECK(e.max_relative_error < 1e-6);
  }
  CHECK(rep.worst() < 1e-6);
}

TEST_CASE("check_derivatives: cusp third derivative is exact") {
  auto pb = scalar_cusp();
  Parameters p = pb->default_parameters();
  const DerivativeReport rep = check_derivatives(*pb, Vec::Constant(1, 0.3), p);
  CHECK(rep.error("third_apply") < 1e-9);
}

TEST_CASE("check_derivatives reports a wrong jacobian") {
  WrongJacobian pb;
  const DerivativeReport rep = check_derivatives(pb, Vec::Constant(1, 0.7), pb.default_parameters());
  CHECK(rep.error("jacobian") == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("check_derivatives: non-finite residual") {
  auto pb = scalar_fold();
  Vec q = Vec::Constant(1, std::numeric_limits<double>::infinity());
  try {
    (void)check_derivatives(*pb, q, pb->default_parameters());
    FAIL("expected evaluation failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::evaluation_failure);
  }
}

TEST_CASE("finite-difference chain on random states for every built-in") {
  std::mt19937_64 rng(11);
  std::vector<ProblemPtr> problems = {brusselator_1d(21), brusselator_0d(), scalar_fold(),
                                      scalar_pitchfork(), scalar_cusp()};
  for (const auto& pb : problems) {
    INFO(pb->name());
    const Parameters p = pb->default_parameters();
    for (int trial = 0; trial < 20; ++trial) {
      const Vec q = initial_state(*pb, p) + 0.3 * random_vec(pb->dim(), rng);
      const Vec v = random_vec(pb->dim(), rng);
      const Vec w = random_vec(pb->dim(), rng);
      const double h = 1e-5 * (1.0 + q.norm());

      const Vec jv = pb->jacobian(q, p) * v;
      const Vec fd = (pb->residual(q + h * v, p) - pb->residual(q - h * v, p)) / (2 * h);
      CHECK((fd - jv).norm() / jv.norm() < 1e-5);

      const Vec hv = pb->hessian_apply(q, p, v, w);
      const Vec fdh = (pb->jacobian(q + h * v, p) * w - pb->jacobian(q - h * v, p) * w) / (2 * h);
      if (hv.norm() > 1e-10) CHECK((fdh - hv).norm() / hv.norm() < 1e-5);

      const Vec u = random_vec(pb->dim(), rng);
      const Vec tv = pb->third_apply(q, p, u, v, w);
      const Vec fdt = (pb->hessian_apply(q + h * u, p, v, w) - pb->hessian_apply(q - h * u, p, v, w)) / (2 * h);
      if (tv.norm() > 1e-10) CHECK((fdt - tv).norm() / tv.norm() < 1e-5);

      for (Index j = 0; j < p.size(); ++j) {
        const double hp = 1e-5 * (1.0 + std::abs(p[j]));
        const Vec g = pb->param_gradient(q, p, j);
        const Vec fdg = (pb->residual(q, p.with(j, p[j] + hp)) - pb->residual(q, p.with(j, p[j] - hp))) / (2 * hp);
        if (g.norm() > 1e-10) CHECK((fdg - g).norm() / g.norm() < 1e-5);
      }
    }
  }
}

TEST_CASE("hessian and third derivative symmetry") {
  std::mt19937_64 rng(3);
  std::vector<ProblemPtr> problems = {brusselator_1d(15), brusselator_0d(), scalar_cusp()};
  for (const auto& pb : problems) {
    const Parameters p = pb->default_parameters();
    const Vec q = random_vec(pb->dim(), rng);
    const Vec u = random_vec(pb->dim(), rng), v = random_vec(pb->dim(), rng), w = random_vec(pb->dim(), rng);
    CHECK((pb->hessian_apply(q, p, u, v) - pb->hessian_apply(q, p, v, u)).norm() == 0.0);
    const Vec t = pb->third_apply(q, p, u, v, w);
    CHECK((t - pb->third_apply(q, p, w, u, v)).norm() <= 1e-13 * (1 + t.norm()));
    CHECK((t - pb->third_apply(q, p, v, w, u)).norm() <= 1e-13 * (1 + t.norm()));
    // Matrix forms agree with the applies.
    CHECK((pb->hessian_matrix(q, p, u) * v - pb->hessian_apply(q, p, u, v)).norm() <= 1e-10 * (1 + t.norm()));
    CHECK((pb->third_matrix(q, p, u, w) * v - t).norm() <= 1e-9 * (1 + t.norm()));
  }
}

TEST_CASE("complex multilinear forms agree with real expansion") {
  std::mt19937_64 rng(5);
  auto pb = brusselator_1d(11);
  const Parameters p = pb->default_parameters();
  const Index n = pb->dim();
  const Vec q = pb->base_state(p);
  CVec u(n), v(n), w(n);
  u.real() = random_vec(n, rng); u.imag() = random_vec(n, rng);
  v.real() = random_vec(n, rng); v.imag() = random_vec(n, rng);
  w.real() = random_vec(n, rng); w.imag() = random_vec(n, rng);
  // Bilinearity: H(u, v) with u = ur + i ui etc.
  const CVec h = hessian_apply(*pb, q, p, u, v);
  const complex i1(0, 1);
  const CVec h_ref = pb->hessian_apply(q, p, u.real(), v.real()).cast<complex>() +
                     i1 * pb->hessian_apply(q, p, u.real(), v.imag()).cast<complex>() +
                     i1 * pb->hessian_apply(q, p, u.imag(), v.real()).cast<complex>() -
                     pb->hessian_apply(q, p, u.imag(), v.imag()).cast<complex>();
  CHECK((h - h_ref).norm() < 1e-12 * h.norm());
  // Scaling each argument by a complex factor scales T by the product.
  const complex a(0.3, -1.2), b(2.0, 0.5), c(-0.7, 0.1);
  const CVec t1 = third_apply(*pb, q, p, CVec(a * u), CVec(b * v), CVec(c * w));
  const CVec t0 = third_apply(*pb, q, p, u, v, w);
  CHECK((t1 - a * b * c * t0).norm() < 1e-12 * t1.norm());
}

TEST_CASE("make_problem registry") {
  CHECK(make_problem("brusselator_1d", {{"grid_points", 9}})->dim() == 14);
  CHECK(make_problem("scalar_cusp")->default_parameters().size() == 2);
  CHECK_THROWS_AS(make_problem("nope"), Error);
  CHECK(registered_problems().size() >= 5);
}

TEST_CASE("parameters") {
  Parameters p({"a", "b"}, Vec::LinSpaced(2, 1.0, 2.0), 1);
  CHECK(p.active_name() == "b");
  CHECK(p.get("a") == 1.0);
  p.set_active("a");
  p.set_active_value(5.0);
  CHECK(p[0] == 5.0);
  CHECK_THROWS_AS((void)p.index_of("c"), Error);
  CHECK_THROWS_AS(Parameters({"a", "a"}, Vec::Zero(2)), Error);
}
