#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. None of these call into the bifurcation or hb modules.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "bifkit/problem.hpp"
#include "bifkit/stability.hpp"

namespace oracle {

using bifkit::complex;
using bifkit::Parameters;
using bifkit::Problem;
using bifkit::Vec;

// Classic RK4 for q' = -M^{-1} R(q), identity mass only.
inline Vec rk4(const Problem& pb, const Parameters& p, Vec q, double dt, long steps) {
  auto f = [&](const Vec& x) -> Vec { return -pb.residual(x, p); };
  for (long s = 0; s < steps; ++s) {
    const Vec k1 = f(q);
    const Vec k2 = f(q + 0.5 * dt * k1);
    const Vec k3 = f(q + 0.5 * dt * k2);
    const Vec k4 = f(q + dt * k3);
    q += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return q;
}

struct Oscillation {
  double amplitude;  // half the peak-to-peak swing of component `comp`
  double period;     // mean spacing of upward mean crossings
};

// Integrates for `settle` time units, then measures over `window`.
inline Oscillation measure(const Problem& pb, const Parameters& p, Vec q, int comp, double dt, double settle,
                           double window) {
  q = rk4(pb, p, q, dt, static_cast<long>(settle / dt));
  const long n = static_cast<long>(window / dt);
  std::vector<double> xs;
  xs.reserve(static_cast<std::size_t>(n));
  for (long s = 0; s < n; ++s) {
    q = rk4(pb, p, q, dt, 1);
    xs.push_back(q[comp]);
  }
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  std::vector<double> ups;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i - 1] < mean && xs[i] >= mean) {
      const double frac = (mean - xs[i - 1]) / (xs[i] - xs[i - 1]);
      ups.push_back((static_cast<double>(i) - 1.0 + frac) * dt);
    }
  }
  double period = 0.0;
  if (ups.size() >= 2) period = (ups.back() - ups.front()) / static_cast<double>(ups.size() - 1);
  return {0.5 * (*hi - *lo), period};
}

// Eigenvalue nearest `target` of the linearization at q.
inline complex tracked_eigenvalue(const Problem& pb, const Vec& q, const Parameters& p, complex target) {
  const auto pairs = bifkit::eigs(pb, q, p, target, 4);
  complex best = pairs.front().lambda;
  for (const auto& e : pairs) {
    if (std::abs(e.lambda - target) < std::abs(best - target)) best = e.lambda;
  }
  return best;
}

// Harmonic k of M q'(t) + R(q(t)) by a direct DFT of S equispaced samples,
// with q(t) = q0 + sum_k (q_k e^{i k w t} + c.c.).
inline std::vector<bifkit::CVec> collocation_dft(const Problem& pb, const Parameters& p, const Vec& q0,
                                                 const std::vector<bifkit::CVec>& qk, double w, int S) {
  const long N = static_cast<long>(qk.size());
  const auto M = pb.mass_matrix(q0, p);
  std::vector<bifkit::CVec> out(static_cast<std::size_t>(N + 1), bifkit::CVec::Zero(q0.size()));
  for (int s = 0; s < S; ++s) {
    const double t = 2.0 * M_PI * s / (S * w);
    Vec q = q0, qd = Vec::Zero(q0.size());
    for (long k = 1; k <= N; ++k) {
      const complex e = std::exp(complex(0.0, k * w * t));
      q += 2.0 * (qk[static_cast<std::size_t>(k - 1)] * e).real();
      qd += 2.0 * (complex(0.0, k * w) * qk[static_cast<std::size_t>(k - 1)] * e).real();
    }
    const Vec F = M * qd + pb.residual(q, p);
    for (long k = 0; k <= N; ++k) {
      out[static_cast<std::size_t>(k)] += F.cast<complex>() * std::exp(complex(0.0, -k * w * t)) / double(S);
    }
  }
  return out;
}

}  // namespace oracle
