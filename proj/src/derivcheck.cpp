#include "bifkit/derivcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bifkit/error.hpp"

namespace bifkit {

double DerivativeReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_relative_error);
  return w;
}

double DerivativeReport::error(const std::string& callback) const {
  for (const auto& e : entries) {
    if (e.callback == callback) return e.max_relative_error;
  }
  throw Error(ErrorKind::invalid_configuration, "no derivative entry '" + callback + "'");
}

namespace {

double relative_error(const Vec& analytic, const Vec& fd) {
  const double scale = std::max(analytic.norm(), fd.norm());
  if (scale == 0.0) return 0.0;
  // Both vanish to rounding: nothing meaningful to compare.
  if (scale < 1e-13) return 0.0;
  return (analytic - fd).norm() / scale;
}

}  // namespace

DerivativeReport check_derivatives(const Problem& pb, const Vec& q, const Parameters& p,
                                   int directions, unsigned seed) {
  check_dimensions(pb, q, p);
  const Vec r0 = pb.residual(q, p);
  if (!r0.allFinite()) {
    throw Error(ErrorKind::evaluation_failure, "residual is not finite at the check point");
  }

  const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, q.norm());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto random_dir = [&]() {
    Vec v(pb.dim());
    for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    return Vec(v / v.norm());
  };

  DerivativeReport report;
  auto record = [&](const std::string& name, double err) {
    for (auto& e : report.entries) {
      if (e.callback == name) {
        e.max_relative_error = std::max(e.max_relative_error, err);
        return;
      }
    }
    report.entries.push_back({name, err});
  };

  const SparseMatrix J = pb.jacobian(q, p);
  for (int d = 0; d < directions; ++d) {
    const Vec u = random_dir(), v = random_dir(), w = random_dir();

    const Vec fd_j = (pb.residual(q + h * u, p) - pb.residual(q - h * u, p)) / (2.0 * h);
    record("jacobian", relative_error(J * u, fd_j));

    const Vec fd_h =
        (pb.jacobian(q + h * u, p) * v - pb.jacobian(q - h * u, p) * v) / (2.0 * h);
    record("hessian_apply", relative_error(pb.hessian_apply(q, p, u, v), fd_h));
    record("hessian_matrix", relative_error(pb.hessian_matrix(q, p, u) * v,
                                            pb.hessian_apply(q, p, u, v)));

    const Vec fd_t =
        (pb.hessian_apply(q + h * w, p, u, v) - pb.hessian_apply(q - h * w, p, u, v)) / (2.0 * h);
    record("third_apply", relative_error(pb.third_apply(q, p, u, v, w), fd_t));
    record("third_matrix", relative_error(pb.third_matrix(q, p, u, w) * v,
                                          pb.third_apply(q, p, u, w, v)));

    const Vec fd_m = (pb.mass_apply(q + h * u, p, v) - pb.mass_apply(q - h * u, p, v)) / (2.0 * h);
    record("mass_jacobian_apply", relative_error(pb.mass_jacobian_apply(q, p, u, v), fd_m));
    const Vec fd_m2 = (pb.mass_jacobian_apply(q + h * w, p, u, v) -
                       pb.mass_jacobian_apply(q - h * w, p, u, v)) /
                      (2.0 * h);
    record("mass_second_apply", relative_error(pb.mass_second_apply(q, p, u, v, w), fd_m2));
  }

  for (Index j = 0; j < p.size(); ++j) {
    const double hp = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(p[j]));
    const Parameters plus = p.with(j, p[j] + hp);
    const Parameters minus = p.with(j, p[j] - hp);
    const std::string tag = "[" + p.names()[static_cast<std::size_t>(j)] + "]";

    const Vec fd_g = (pb.residual(q, plus) - pb.residual(q, minus)) / (2.0 * hp);
    record("param_gradient" + tag, relative_error(pb.param_gradient(q, p, j), fd_g));

    std::mt19937_64 local(seed + static_cast<unsigned>(j));
    Vec v(pb.dim());
    for (Index i = 0; i < v.size(); ++i) v[i] = std::normal_distribution<double>()(local);
    const Vec fd_mixed = (pb.jacobian(q, plus) * v - pb.jacobian(q, minus) * v) / (2.0 * hp);
    record("mixed_param_jacobian_apply" + tag,
           relative_error(pb.mixed_param_jacobian_apply(q, p, j, v), fd_mixed));
    const Vec fd_mp = (pb.mass_apply(q, plus, v) - pb.mass_apply(q, minus, v)) / (2.0 * hp);
    record("mass_param_gradient_apply" + tag,
           relative_error(pb.mass_param_gradient_apply(q, p, j, v), fd_mp));
  }
  return report;
}

}  // namespace bifkit
