#include "bifkit/problem.hpp"

#include <algorithm>
#include <cmath>

#include "bifkit/error.hpp"

namespace bifkit {

SparseMatrix Problem::mass_matrix(const Vec& /*q*/, const Parameters& /*p*/) const {
  SparseMatrix eye(dim(), dim());
  eye.setIdentity();
  return eye;
}

Vec Problem::mass_apply(const Vec& q, const Parameters& p, const Vec& v) const {
  return mass_matrix(q, p) * v;
}

Vec Problem::mass_jacobian_apply(const Vec& /*q*/, const Parameters& /*p*/, const Vec& /*u*/,
                                 const Vec& /*v*/) const {
  return Vec::Zero(dim());
}

Vec Problem::mass_second_apply(const Vec& /*q*/, const Parameters& /*p*/, const Vec& /*u*/,
                               const Vec& /*v*/, const Vec& /*w*/) const {
  return Vec::Zero(dim());
}

Vec Problem::mass_param_gradient_apply(const Vec& /*q*/, const Parameters& /*p*/, Index /*j*/,
                                       const Vec& /*v*/) const {
  return Vec::Zero(dim());
}

namespace {

double probe_scale(const Vec& q, const Vec& u) {
  const double un = u.norm();
  if (un == 0.0) return 0.0;
  return std::max(1.0, q.norm()) / un;
}

}  // namespace

SparseMatrix Problem::hessian_matrix(const Vec& q, const Parameters& p, const Vec& u) const {
  const double eps = probe_scale(q, u);
  if (eps == 0.0) return SparseMatrix(dim(), dim());
  // J(q + e u) - J(q - e u) = 2 e H(u, .) + O(e^3 d_qqqq R), exact for cubics.
  SparseMatrix d = jacobian(q + eps * u, p) - jacobian(q - eps * u, p);
  d *= 0.5 / eps;
  d.prune(0.0);
  return d;
}

SparseMatrix Problem::third_matrix(const Vec& q, const Parameters& p, const Vec& u,
                                   const Vec& w) const {
  const double eu = probe_scale(q, u);
  const double ew = probe_scale(q, w);
  if (eu == 0.0 || ew == 0.0) return SparseMatrix(dim(), dim());
  const Vec a = eu * u;
  const Vec b = ew * w;
  SparseMatrix d = jacobian(q + a + b, p) - jacobian(q + a - b, p) - jacobian(q - a + b, p) +
                   jacobian(q - a - b, p);
  d *= 0.25 / (eu * ew);
  d.prune(0.0);
  return d;
}

CVec hessian_apply(const Problem& pb, const Vec& q, const Parameters& p, const CVec& u,
                   const CVec& v) {
  const Vec ur = u.real(), ui = u.imag(), vr = v.real(), vi = v.imag();
  const Vec re = pb.hessian_apply(q, p, ur, vr) - pb.hessian_apply(q, p, ui, vi);
  const Vec im = pb.hessian_apply(q, p, ur, vi) + pb.hessian_apply(q, p, ui, vr);
  CVec out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

CVec third_apply(const Problem& pb, const Vec& q, const Parameters& p, const CVec& u,
                 const CVec& v, const CVec& w) {
  const Vec ur = u.real(), ui = u.imag(), vr = v.real(), vi = v.imag(), wr = w.real(),
            wi = w.imag();
  auto t = [&](const Vec& a, const Vec& b, const Vec& c) { return pb.third_apply(q, p, a, b, c); };
  const Vec re = t(ur, vr, wr) - t(ur, vi, wi) - t(ui, vr, wi) - t(ui, vi, wr);
  const Vec im = t(ur, vr, wi) + t(ur, vi, wr) + t(ui, vr, wr) - t(ui, vi, wi);
  CVec out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

namespace {

template <typename F>
CVec apply_linear(const CVec& v, F&& f) {
  const Vec re = f(Vec(v.real()));
  const Vec im = f(Vec(v.imag()));
  CVec out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

}  // namespace

CVec mixed_param_jacobian_apply(const Problem& pb, const Vec& q, const Parameters& p, Index j,
                                const CVec& v) {
  return apply_linear(v, [&](const Vec& x) { return pb.mixed_param_jacobian_apply(q, p, j, x); });
}

CVec mass_apply(const Problem& pb, const Vec& q, const Parameters& p, const CVec& v) {
  return apply_linear(v, [&](const Vec& x) { return pb.mass_apply(q, p, x); });
}

CVec mass_jacobian_apply(const Problem& pb, const Vec& q, const Parameters& p, const CVec& u,
                         const CVec& v) {
  const Vec ur = u.real(), ui = u.imag(), vr = v.real(), vi = v.imag();
  const Vec re = pb.mass_jacobian_apply(q, p, ur, vr) - pb.mass_jacobian_apply(q, p, ui, vi);
  const Vec im = pb.mass_jacobian_apply(q, p, ur, vi) + pb.mass_jacobian_apply(q, p, ui, vr);
  CVec out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

CVec mass_param_gradient_apply(const Problem& pb, const Vec& q, const Parameters& p, Index j,
                               const CVec& v) {
  return apply_linear(v, [&](const Vec& x) { return pb.mass_param_gradient_apply(q, p, j, x); });
}

void check_dimensions(const Problem& pb, const Vec& q, const Parameters& p) {
  if (q.size() != pb.dim()) {
    throw Error(ErrorKind::dimension_mismatch,
                "state has " + std::to_string(q.size()) + " entries, problem '" + pb.name() +
                    "' expects " + std::to_string(pb.dim()));
  }
  if (p.size() != pb.default_parameters().size()) {
    throw Error(ErrorKind::dimension_mismatch, "parameter vector does not match problem '" +
                                                   pb.name() + "'");
  }
}

}  // namespace bifkit
