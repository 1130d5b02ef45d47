#include "bifkit/fourier.hpp"

#include <cmath>
#include <numbers>

namespace bifkit {

double FourierState::period() const { return 2.0 * std::numbers::pi / omega; }

FourierState FourierState::zeros(Index dim, Index order, double omega) {
  FourierState fs;
  fs.mean = Vec::Zero(dim);
  fs.harmonics.assign(static_cast<std::size_t>(order), CVec::Zero(dim));
  fs.omega = omega;
  return fs;
}

Vec FourierState::pack() const {
  const Index n = dim(), N = order();
  Vec x(n * (2 * N + 1) + 1);
  x.head(n) = mean;
  for (Index k = 0; k < N; ++k) {
    x.segment(n * (1 + 2 * k), n) = harmonics[static_cast<std::size_t>(k)].real();
    x.segment(n * (2 + 2 * k), n) = harmonics[static_cast<std::size_t>(k)].imag();
  }
  x[x.size() - 1] = omega;
  return x;
}

FourierState FourierState::unpack(const Vec& x, Index dim, Index order) {
  FourierState fs = zeros(dim, order, x[x.size() - 1]);
  fs.mean = x.head(dim);
  for (Index k = 0; k < order; ++k) {
    CVec& h = fs.harmonics[static_cast<std::size_t>(k)];
    h.real() = x.segment(dim * (1 + 2 * k), dim);
    h.imag() = x.segment(dim * (2 + 2 * k), dim);
  }
  return fs;
}

}  // namespace bifkit
