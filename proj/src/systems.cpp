#include "bifkit/systems.hpp"

#include <cmath>

#include "bifkit/error.hpp"

namespace bifkit {

namespace {

enum BrusselatorParam : Index { kA = 0, kB = 1, kDx = 2, kDy = 3, kL = 4 };

SparseMatrix from_triplets(Index n, const std::vector<Triplet>& t) {
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Brusselator1D

Brusselator1D::Brusselator1D(int grid_points) {
  if (grid_points < 3) {
    throw Error(ErrorKind::invalid_configuration, "brusselator_1d needs at least 3 grid points");
  }
  m_ = grid_points - 2;
  h_ = 1.0 / static_cast<double>(grid_points - 1);
}

Parameters Brusselator1D::default_parameters() const {
  Vec v(5);
  v << 2.0, 5.45, 0.008, 0.004, 0.5;
  return Parameters({"A", "B", "D_X", "D_Y", "L"}, v, kL);
}

Vec Brusselator1D::base_state(const Parameters& p) const {
  Vec q(dim());
  q.head(m_).setConstant(p[kA]);
  q.tail(m_).setConstant(p[kB] / p[kA]);
  return q;
}

Vec Brusselator1D::laplacian0(const Eigen::Ref<const Vec>& x) const {
  Vec out(m_);
  for (Index i = 0; i < m_; ++i) {
    const double left = i > 0 ? x[i - 1] : 0.0;
    const double right = i + 1 < m_ ? x[i + 1] : 0.0;
    out[i] = left - 2.0 * x[i] + right;
  }
  return out;
}

Vec Brusselator1D::residual(const Vec& q, const Parameters& p) const {
  const double A = p[kA], B = p[kB], L = p[kL];
  const double cx = p[kDx] / (L * L * h_ * h_);
  const double cy = p[kDy] / (L * L * h_ * h_);
  const auto X = q.head(m_);
  const auto Y = q.tail(m_);
  Vec lx = laplacian0(X);
  Vec ly = laplacian0(Y);
  lx[0] += A;
  lx[m_ - 1] += A;
  ly[0] += B / A;
  ly[m_ - 1] += B / A;

  Vec r(dim());
  for (Index i = 0; i < m_; ++i) {
    const double x2y = X[i] * X[i] * Y[i];
    r[i] = -A + (B + 1.0) * X[i] - x2y - cx * lx[i];
    r[m_ + i] = -B * X[i] + x2y - cy * ly[i];
  }
  return r;
}

SparseMatrix Brusselator1D::jacobian(const Vec& q, const Parameters& p) const {
  const double B = p[kB], L = p[kL];
  const double cx = p[kDx] / (L * L * h_ * h_);
  const double cy = p[kDy] / (L * L * h_ * h_);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(8 * m_));
  for (Index i = 0; i < m_; ++i) {
    const double x = q[i], y = q[m_ + i];
    const Index ix = i, iy = m_ + i;
    t.emplace_back(ix, ix, (B + 1.0) - 2.0 * x * y + 2.0 * cx);
    t.emplace_back(ix, iy, -x * x);
    t.emplace_back(iy, ix, -B + 2.0 * x * y);
    t.emplace_back(iy, iy, x * x + 2.0 * cy);
    if (i > 0) {
      t.emplace_back(ix, ix - 1, -cx);
      t.emplace_back(iy, iy - 1, -cy);
    }
    if (i + 1 < m_) {
      t.emplace_back(ix, ix + 1, -cx);
      t.emplace_back(iy, iy + 1, -cy);
    }
  }
  return from_triplets(dim(), t);
}

Vec Brusselator1D::param_gradient(const Vec& q, const Parameters& p, Index j) const {
  const double A = p[kA], B = p[kB], L = p[kL];
  const double inv = 1.0 / (L * L * h_ * h_);
  const double cx = p[kDx] * inv, cy = p[kDy] * inv;
  const auto X = q.head(m_);
  const auto Y = q.tail(m_);
  Vec g = Vec::Zero(dim());
  // Dirichlet data enters the first and last interior rows.
  auto boundary = [&](Index offset, double value) {
    g[offset] += value;
    g[offset + m_ - 1] += value;
  };
  switch (j) {
    case kA:
      g.head(m_).setConstant(-1.0);
      boundary(0, -cx);
      boundary(m_, cy * B / (A * A));
      break;
    case kB:
      g.head(m_) = X;
      g.tail(m_) = -X;
      boundary(m_, -cy / A);
      break;
    case kDx:
    case kL: {
      Vec lx = laplacian0(X);
      lx[0] += A;
      lx[m_ - 1] += A;
      if (j == kDx) {
        g.head(m_) = -inv * lx;
        break;
      }
      Vec ly = laplacian0(Y);
      ly[0] += B / A;
      ly[m_ - 1] += B / A;
      g.head(m_) = (2.0 * cx / L) * lx;
      g.tail(m_) = (2.0 * cy / L) * ly;
      break;
    }
    case kDy: {
      Vec ly = laplacian0(Y);
      ly[0] += B / A;
      ly[m_ - 1] += B / A;
      g.tail(m_) = -inv * ly;
      break;
    }
    default:
      throw Error(ErrorKind::invalid_configuration, "parameter index out of range");
  }
  return g;
}

Vec Brusselator1D::hessian_apply(const Vec& q, const Parameters& /*p*/, const Vec& u,
                                 const Vec& v) const {
  Vec out(dim());
  for (Index i = 0; i < m_; ++i) {
    const double x = q[i], y = q[m_ + i];
    const double ux = u[i], uy = u[m_ + i], vx = v[i], vy = v[m_ + i];
    // second derivative of X^2 Y
    const double d2 = 2.0 * y * (ux * vx) + 2.0 * x * (ux * vy + vx * uy);
    out[i] = -d2;
    out[m_ + i] = d2;
  }
  return out;
}

Vec Brusselator1D::third_apply(const Vec& /*q*/, const Parameters& /*p*/, const Vec& u,
                               const Vec& v, const Vec& w) const {
  Vec out(dim());
  for (Index i = 0; i < m_; ++i) {
    const Index j = m_ + i;
    const double d3 = 2.0 * (u[i] * v[i] * w[j] + u[i] * v[j] * w[i] + u[j] * v[i] * w[i]);
    out[i] = -d3;
    out[j] = d3;
  }
  return out;
}

Vec Brusselator1D::mixed_param_jacobian_apply(const Vec& /*q*/, const Parameters& p, Index j,
                                              const Vec& v) const {
  const double L = p[kL];
  const double inv = 1.0 / (L * L * h_ * h_);
  Vec out = Vec::Zero(dim());
  switch (j) {
    case kA:
      break;
    case kB:
      out.head(m_) = v.head(m_);
      out.tail(m_) = -v.head(m_);
      break;
    case kDx:
      out.head(m_) = -inv * laplacian0(v.head(m_));
      break;
    case kDy:
      out.tail(m_) = -inv * laplacian0(v.tail(m_));
      break;
    case kL:
      out.head(m_) = (2.0 * p[kDx] * inv / L) * laplacian0(v.head(m_));
      out.tail(m_) = (2.0 * p[kDy] * inv / L) * laplacian0(v.tail(m_));
      break;
    default:
      throw Error(ErrorKind::invalid_configuration, "parameter index out of range");
  }
  return out;
}

SparseMatrix Brusselator1D::hessian_matrix(const Vec& q, const Parameters& /*p*/,
                                           const Vec& u) const {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(4 * m_));
  for (Index i = 0; i < m_; ++i) {
    const Index ix = i, iy = m_ + i;
    const double x = q[ix], y = q[iy];
    const double cxx = 2.0 * y * u[ix] + 2.0 * x * u[iy];
    const double cxy = 2.0 * x * u[ix];
    t.emplace_back(ix, ix, -cxx);
    t.emplace_back(ix, iy, -cxy);
    t.emplace_back(iy, ix, cxx);
    t.emplace_back(iy, iy, cxy);
  }
  return from_triplets(dim(), t);
}

SparseMatrix Brusselator1D::third_matrix(const Vec& /*q*/, const Parameters& /*p*/, const Vec& u,
                                         const Vec& w) const {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(4 * m_));
  for (Index i = 0; i < m_; ++i) {
    const Index ix = i, iy = m_ + i;
    const double cxx = 2.0 * (u[ix] * w[iy] + u[iy] * w[ix]);
    const double cxy = 2.0 * u[ix] * w[ix];
    t.emplace_back(ix, ix, -cxx);
    t.emplace_back(ix, iy, -cxy);
    t.emplace_back(iy, ix, cxx);
    t.emplace_back(iy, iy, cxy);
  }
  return from_triplets(dim(), t);
}

// ---------------------------------------------------------------------------
// Brusselator0D

Parameters Brusselator0D::default_parameters() const {
  Vec v(2);
  v << 2.0, 4.5;
  return Parameters({"A", "B"}, v, kB);
}

Vec Brusselator0D::equilibrium(const Parameters& p) const {
  Vec q(2);
  q << p[kA], p[kB] / p[kA];
  return q;
}

Vec Brusselator0D::residual(const Vec& q, const Parameters& p) const {
  const double A = p[kA], B = p[kB];
  const double x2y = q[0] * q[0] * q[1];
  Vec r(2);
  r << -A + (B + 1.0) * q[0] - x2y, -B * q[0] + x2y;
  return r;
}

SparseMatrix Brusselator0D::jacobian(const Vec& q, const Parameters& p) const {
  const double B = p[kB];
  const double x = q[0], y = q[1];
  std::vector<Triplet> t{{0, 0, B + 1.0 - 2.0 * x * y},
                         {0, 1, -x * x},
                         {1, 0, -B + 2.0 * x * y},
                         {1, 1, x * x}};
  return from_triplets(2, t);
}

Vec Brusselator0D::param_gradient(const Vec& q, const Parameters& /*p*/, Index j) const {
  Vec g(2);
  if (j == kA) {
    g << -1.0, 0.0;
  } else if (j == kB) {
    g << q[0], -q[0];
  } else {
    throw Error(ErrorKind::invalid_configuration, "parameter index out of range");
  }
  return g;
}

Vec Brusselator0D::hessian_apply(const Vec& q, const Parameters& /*p*/, const Vec& u,
                                 const Vec& v) const {
  const double d2 = 2.0 * q[1] * (u[0] * v[0]) + 2.0 * q[0] * (u[0] * v[1] + v[0] * u[1]);
  Vec out(2);
  out << -d2, d2;
  return out;
}

Vec Brusselator0D::third_apply(const Vec& /*q*/, const Parameters& /*p*/, const Vec& u,
                               const Vec& v, const Vec& w) const {
  const double d3 = 2.0 * (u[0] * v[0] * w[1] + u[0] * v[1] * w[0] + u[1] * v[0] * w[0]);
  Vec out(2);
  out << -d3, d3;
  return out;
}

Vec Brusselator0D::mixed_param_jacobian_apply(const Vec& /*q*/, const Parameters& /*p*/, Index j,
                                              const Vec& v) const {
  Vec out = Vec::Zero(2);
  if (j == kB) out << v[0], -v[0];
  return out;
}

// ---------------------------------------------------------------------------
// ScalarSystem

std::string ScalarSystem::name() const {
  switch (kind_) {
    case ScalarKind::fold: return "scalar_fold";
    case ScalarKind::pitchfork: return "scalar_pitchfork";
    case ScalarKind::cusp: return "scalar_cusp";
  }
  return "scalar";
}

Parameters ScalarSystem::default_parameters() const {
  if (kind_ == ScalarKind::cusp) return Parameters({"a1", "a2"}, Vec::Zero(2), 0);
  Vec v(1);
  v << -1.0;
  return Parameters({"a1"}, v, 0);
}

Vec ScalarSystem::residual(const Vec& q, const Parameters& p) const {
  const double x = q[0];
  Vec r(1);
  switch (kind_) {
    case ScalarKind::fold: r[0] = x * x + p[0]; break;
    case ScalarKind::pitchfork: r[0] = x * x * x - p[0] * x; break;
    case ScalarKind::cusp: r[0] = x * x * x + p[1] * x + p[0]; break;
  }
  return r;
}

SparseMatrix ScalarSystem::jacobian(const Vec& q, const Parameters& p) const {
  const double x = q[0];
  double d = 0.0;
  switch (kind_) {
    case ScalarKind::fold: d = 2.0 * x; break;
    case ScalarKind::pitchfork: d = 3.0 * x * x - p[0]; break;
    case ScalarKind::cusp: d = 3.0 * x * x + p[1]; break;
  }
  // The entry is kept even when zero so the sparsity pattern is fixed.
  SparseMatrix m(1, 1);
  m.insert(0, 0) = d;
  return m;
}

Vec ScalarSystem::param_gradient(const Vec& q, const Parameters& p, Index j) const {
  if (j < 0 || j >= p.size()) {
    throw Error(ErrorKind::invalid_configuration, "parameter index out of range");
  }
  Vec g(1);
  switch (kind_) {
    case ScalarKind::fold: g[0] = 1.0; break;
    case ScalarKind::pitchfork: g[0] = -q[0]; break;
    case ScalarKind::cusp: g[0] = j == 0 ? 1.0 : q[0]; break;
  }
  return g;
}

Vec ScalarSystem::hessian_apply(const Vec& q, const Parameters& /*p*/, const Vec& u,
                                const Vec& v) const {
  Vec out(1);
  out[0] = (kind_ == ScalarKind::fold ? 2.0 : 6.0 * q[0]) * (u[0] * v[0]);
  return out;
}

Vec ScalarSystem::third_apply(const Vec& /*q*/, const Parameters& /*p*/, const Vec& u,
                              const Vec& v, const Vec& w) const {
  Vec out(1);
  out[0] = (kind_ == ScalarKind::fold ? 0.0 : 6.0) * u[0] * v[0] * w[0];
  return out;
}

Vec ScalarSystem::mixed_param_jacobian_apply(const Vec& /*q*/, const Parameters& /*p*/, Index j,
                                             const Vec& v) const {
  Vec out = Vec::Zero(1);
  if (kind_ == ScalarKind::pitchfork) out[0] = -v[0];
  if (kind_ == ScalarKind::cusp && j == 1) out[0] = v[0];
  return out;
}

// ---------------------------------------------------------------------------
// LinearSystem

LinearSystem::LinearSystem(SparseMatrix K, Vec c, Vec d, SparseMatrix M)
    : K_(std::move(K)), c_(std::move(c)), d_(std::move(d)), M_(std::move(M)) {
  const Index n = K_.rows();
  if (K_.cols() != n || c_.size() != n || d_.size() != n) {
    throw Error(ErrorKind::dimension_mismatch, "linear system blocks disagree in size");
  }
  if (M_.rows() == 0) {
    M_.resize(n, n);
    M_.setIdentity();
  } else if (M_.rows() != n || M_.cols() != n) {
    throw Error(ErrorKind::dimension_mismatch, "mass matrix has the wrong size");
  }
}

Parameters LinearSystem::default_parameters() const { return Parameters({"alpha"}, Vec::Zero(1), 0); }

Vec LinearSystem::residual(const Vec& q, const Parameters& p) const { return K_ * q - c_ - p[0] * d_; }

SparseMatrix LinearSystem::jacobian(const Vec& /*q*/, const Parameters& /*p*/) const { return K_; }

Vec LinearSystem::param_gradient(const Vec& /*q*/, const Parameters& /*p*/, Index /*j*/) const {
  return -d_;
}

Vec LinearSystem::hessian_apply(const Vec&, const Parameters&, const Vec&, const Vec&) const {
  return Vec::Zero(dim());
}

Vec LinearSystem::third_apply(const Vec&, const Parameters&, const Vec&, const Vec&,
                              const Vec&) const {
  return Vec::Zero(dim());
}

Vec LinearSystem::mixed_param_jacobian_apply(const Vec&, const Parameters&, Index,
                                             const Vec&) const {
  return Vec::Zero(dim());
}

SparseMatrix LinearSystem::mass_matrix(const Vec&, const Parameters&) const { return M_; }

// ---------------------------------------------------------------------------
// Registry

std::shared_ptr<Brusselator1D> brusselator_1d(int grid_points) {
  return std::make_shared<Brusselator1D>(grid_points);
}
std::shared_ptr<Brusselator0D> brusselator_0d() { return std::make_shared<Brusselator0D>(); }
std::shared_ptr<ScalarSystem> scalar_fold() {
  return std::make_shared<ScalarSystem>(ScalarKind::fold);
}
std::shared_ptr<ScalarSystem> scalar_pitchfork() {
  return std::make_shared<ScalarSystem>(ScalarKind::pitchfork);
}
std::shared_ptr<ScalarSystem> scalar_cusp() {
  return std::make_shared<ScalarSystem>(ScalarKind::cusp);
}

std::vector<std::string> registered_problems() {
  return {"brusselator_1d", "brusselator_0d", "scalar_fold", "scalar_pitchfork", "scalar_cusp"};
}

ProblemPtr make_problem(const std::string& name, const std::map<std::string, double>& options) {
  auto known = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : options) {
      bool ok = false;
      for (const char* k : keys) ok = ok || key == k;
      if (!ok) {
        throw Error(ErrorKind::invalid_configuration,
                    "option '" + key + "' is not understood by problem '" + name + "'");
      }
    }
  };
  if (name == "brusselator_1d") {
    known({"grid_points"});
    const auto it = options.find("grid_points");
    const double g = it == options.end() ? 201.0 : it->second;
    if (g != std::floor(g)) {
      throw Error(ErrorKind::invalid_configuration, "grid_points must be an integer");
    }
    return brusselator_1d(static_cast<int>(g));
  }
  known({});
  if (name == "brusselator_0d") return brusselator_0d();
  if (name == "scalar_fold") return scalar_fold();
  if (name == "scalar_pitchfork") return scalar_pitchfork();
  if (name == "scalar_cusp") return scalar_cusp();
  throw Error(ErrorKind::invalid_configuration, "unknown problem '" + name + "'");
}

Vec initial_state(const Problem& pb, const Parameters& p) {
  if (const auto* b1 = dynamic_cast<const Brusselator1D*>(&pb)) return b1->base_state(p);
  if (const auto* b0 = dynamic_cast<const Brusselator0D*>(&pb)) return b0->equilibrium(p);
  if (pb.name() == "scalar_fold" && p[0] < 0.0) return Vec::Constant(1, std::sqrt(-p[0]));
  return Vec::Zero(pb.dim());
}

}  // namespace bifkit
