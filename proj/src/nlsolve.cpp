#include "bifkit/nlsolve.hpp"

#include <cmath>

#include "bifkit/linalg.hpp"

namespace bifkit {

void NewtonSettings::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iterations < 1 || !(shrink > 0.0 && shrink < 1.0) ||
      max_halvings < 0) {
    throw Error(ErrorKind::invalid_configuration, "Newton settings out of range");
  }
}

void DeflationSettings::validate() const {
  if (!(order_p >= 1.0) || !(shift_a >= 0.0)) {
    throw Error(ErrorKind::invalid_configuration, "deflation requires p >= 1 and a >= 0");
  }
}

double deflation_scale(const Vec& q, const Vec& dq, const DeflationSettings& deflation) {
  double scale = 1.0;
  for (const Vec& qj : deflation.known_solutions) {
    if (qj.size() != q.size()) throw Error(ErrorKind::dimension_mismatch, "known solution has wrong size");
    const Vec diff = q - qj;
    const double d = diff.norm();
    if (d < 1e-12) throw Error(ErrorKind::deflation_singular, "iterate coincides with a known solution");
    const double m = 1.0 + deflation.shift_a * std::pow(d, deflation.order_p);
    scale *= m / (m - deflation.order_p * diff.dot(dq) / (d * d));
  }
  return scale;
}

NewtonResult newton_iterate(const NewtonCallbacks& cb, const Vec& x0, const NewtonSettings& settings) {
  settings.validate();
  NewtonResult res;
  Vec x = x0;
  Vec r = cb.residual(x);
  double rn = r.norm();
  const double tol = std::max(settings.abs_tol, settings.rel_tol * rn);
  res.iterates.push_back(x);
  res.residual_history.push_back(rn);

  auto finish = [&](bool ok, std::string msg) {
    res.q = x;
    res.converged = ok;
    res.residual_norm = rn;
    res.message = std::move(msg);
    return res;
  };
  if (!std::isfinite(rn)) return finish(false, "non-finite initial residual");
  if (rn <= tol) return finish(true, "");

  for (int it = 1; it <= settings.max_iterations; ++it) {
    Vec dx;
    try {
      dx = cb.step(x, r);
    } catch (const SingularJacobianError& e) {
      // Singular at the caller's own starting point is an error; reaching a
      // singular Jacobian later is one way of failing to converge.
      if (it == 1) throw;
      return finish(false, e.what());
    }
    if (cb.scale) dx *= cb.scale(x, dx);

    double t = 1.0;
    Vec xn = x - dx;
    Vec rnew = cb.residual(xn);
    double rnn = rnew.norm();
    if (settings.damping == Damping::backtracking) {
      for (int h = 0; h < settings.max_halvings && !(rnn < rn); ++h) {
        t *= settings.shrink;
        xn = x - t * dx;
        rnew = cb.residual(xn);
        rnn = rnew.norm();
      }
    }
    x = std::move(xn);
    r = std::move(rnew);
    rn = rnn;
    res.iterations = it;
    res.iterates.push_back(x);
    res.residual_history.push_back(rn);
    if (!std::isfinite(rn)) return finish(false, "residual became non-finite");
    if (rn <= tol) return finish(true, "");
  }
  return finish(false, "maximum iterations reached, |R| = " + std::to_string(rn));
}

namespace {

NewtonCallbacks steady_callbacks(const Problem& pb, const Parameters& p) {
  NewtonCallbacks cb;
  cb.residual = [&pb, &p](const Vec& q) { return pb.residual(q, p); };
  cb.step = [&pb, &p](const Vec& q, const Vec& r) {
    Factorization lu;
    try {
      lu = Factorization(pb.jacobian(q, p));
    } catch (const SingularMatrixError& e) {
      throw SingularJacobianError(q, std::string("Newton: ") + e.what());
    }
    return lu.solve(r);
  };
  return cb;
}

}  // namespace

NewtonResult newton_solve(const Problem& pb, const Vec& q0, const Parameters& p,
                          const NewtonSettings& settings) {
  check_dimensions(pb, q0, p);
  return newton_iterate(steady_callbacks(pb, p), q0, settings);
}

NewtonResult deflated_newton_solve(const Problem& pb, const Vec& q0, const Parameters& p,
                                   const NewtonSettings& newton, const DeflationSettings& deflation) {
  check_dimensions(pb, q0, p);
  deflation.validate();
  NewtonCallbacks cb = steady_callbacks(pb, p);
  cb.scale = [&deflation](const Vec& q, const Vec& dq) { return deflation_scale(q, dq, deflation); };
  NewtonResult res = newton_iterate(cb, q0, newton);
  if (res.converged) {
    for (const Vec& qj : deflation.known_solutions) {
      if ((res.q - qj).norm() <= 10.0 * newton.abs_tol) {
        res.converged = false;
        res.message = "converged to a deflated solution";
        break;
      }
    }
  }
  return res;
}

}  // namespace bifkit
