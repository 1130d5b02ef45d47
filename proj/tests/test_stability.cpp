#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "bifkit/error.hpp"
#include "bifkit/stability.hpp"
#include "bifkit/systems.hpp"

using namespace bifkit;

namespace {

SparseMatrix random_sparse(Index n, std::mt19937_64& rng, double density, bool symmetric) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), coin(0.0, 1.0);
  Mat A = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (coin(rng) < density) A(i, j) = u(rng);
    }
    A(i, i) += 2.0 * u(rng);
  }
  if (symmetric) A = (A + A.transpose()).eval();
  return A.sparseView();
}

SparseMatrix eye(Index n) {
  SparseMatrix I(n, n);
  I.setIdentity();
  return I;
}

}  // namespace

TEST_CASE("diagonal system eigenvalues are minus the diagonal") {
  SparseMatrix K(3, 3);
  K.insert(0, 0) = 1.0;
  K.insert(1, 1) = 2.0;
  K.insert(2, 2) = 3.0;
  LinearSystem pb(K, Vec::Zero(3), Vec::Zero(3));
  const auto pairs = eigs(pb, Vec::Zero(3), pb.default_parameters(), 0.0, 3);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].lambda == complex(-1.0, 0.0));
  CHECK(pairs[1].lambda.real() == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(pairs[2].lambda.real() == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK(classify_stability(pairs) == Stability::stable);
}

TEST_CASE("brusselator_1d(201) critical pair near L = 0.51302 (Krylov path)") {
  auto pb = brusselator_1d(201);
  Parameters p = pb->default_parameters();
  p.set("L", 0.51302);
  const auto pairs = eigs(*pb, pb->base_state(p), p, complex(0.0, 2.0), 4, true);
  REQUIRE(!pairs.empty());
  const EigenPair& e = pairs[0];
  CHECK(std::abs(e.lambda.real()) < 0.01);
  CHECK(e.lambda.imag() == doctest::Approx(2.1395).epsilon(0.01));
  for (const auto& pr : pairs) {
    CHECK(pr.residual_norm < 1e-8);
    REQUIRE(pr.adjoint_mode.has_value());
    const SparseMatrix Jt = SparseMatrix(pb->jacobian(pb->base_state(p), p).transpose());
    const CVec r = Jt.cast<complex>() * *pr.adjoint_mode + std::conj(pr.lambda) * *pr.adjoint_mode;
    CHECK(r.norm() < 1e-8 * pr.adjoint_mode->norm());
    CHECK(std::abs(pr.adjoint_mode->dot(pr.direct_mode) - 1.0) < 1e-10);
  }
}

TEST_CASE("real shift finds conjugate pairs") {
  auto pb = brusselator_1d(101);
  Parameters p = pb->default_parameters();
  p.set("L", 0.5);
  const auto pairs = eigs(*pb, pb->base_state(p), p, 0.0, 6);
  for (const auto& e : pairs) {
    CHECK(e.residual_norm < 1e-8);
    if (std::abs(e.lambda.imag()) > 1e-6) {
      bool found = false;
      for (const auto& f : pairs) found = found || std::abs(f.lambda - std::conj(e.lambda)) < 1e-8;
      CHECK(found);
    }
  }
}

TEST_CASE("symmetric pencil: adjoint equals direct spectrum, biorthogonal modes") {
  std::mt19937_64 rng(5);
  const Index n = 40;
  const SparseMatrix J = random_sparse(n, rng, 0.1, true);
  EigsSettings s;
  s.shift = 0.1;
  s.nev = 5;
  s.want_adjoint = true;
  s.dense_threshold = 0;
  const auto pairs = eigs_pencil(J, eye(n), s);
  REQUIRE(pairs.size() == 5);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(std::abs(pairs[i].lambda.imag()) < 1e-10);
    REQUIRE(pairs[i].adjoint_mode.has_value());
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      if (i == j) continue;
      CHECK(std::abs(pairs[i].adjoint_mode->dot(pairs[j].direct_mode)) < 1e-8);
    }
  }
}

TEST_CASE("Krylov agrees with dense on random nonsymmetric pencils") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 6; ++trial) {
    const Index n = 30 + 12 * trial;
    const SparseMatrix J = random_sparse(n, rng, 0.08, false);
    const SparseMatrix M = eye(n);
    EigsSettings s;
    s.shift = complex(0.2, 0.3 * trial);
    s.nev = 6;
    s.dense_threshold = 0;
    const auto kry = eigs_pencil(J, M, s);
    // Reference: full dense spectrum of -J.
    Eigen::ComplexEigenSolver<CMat> es(CMat(-Mat(J).cast<complex>()));
    std::vector<complex> ref(es.eigenvalues().data(), es.eigenvalues().data() + n);
    std::sort(ref.begin(), ref.end(), [&](complex a, complex b) {
      return std::abs(a - s.shift) < std::abs(b - s.shift);
    });
    REQUIRE(kry.size() == 6);
    for (std::size_t i = 0; i < kry.size(); ++i) {
      CHECK(kry[i].residual_norm < 1e-8);
      double dmin = 1e300;
      for (const complex& r : ref) dmin = std::min(dmin, std::abs(r - kry[i].lambda));
      CHECK(dmin < 1e-8);
      // Same distance to the shift as the i-th nearest reference eigenvalue.
      CHECK(std::abs(std::abs(kry[i].lambda - s.shift) - std::abs(ref[i] - s.shift)) < 1e-8);
    }
  }
}

TEST_CASE("shift at an eigenvalue is rejected") {
  SparseMatrix K(2, 2);
  K.insert(0, 0) = 1.0;
  K.insert(1, 1) = 2.0;
  try {
    EigsSettings s;
    s.shift = -1.0;
    s.nev = 1;
    (void)eigs_pencil(K, eye(2), s);
    FAIL("expected singular shift");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_shift);
  }
}

TEST_CASE("classify_stability") {
  auto pair = [](double sigma) {
    EigenPair e;
    e.lambda = complex(sigma, 1.0);
    return e;
  };
  CHECK(classify_stability({pair(-0.2), pair(-0.1)}) == Stability::stable);
  CHECK(classify_stability({pair(-0.2), pair(0.05)}) == Stability::unstable);
  CHECK(classify_stability({pair(-0.2), pair(0.0)}) == Stability::marginal);
  CHECK_THROWS_AS(classify_stability({}), Error);
}
