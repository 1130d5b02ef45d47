#pragma once

#include <vector>

#include "bifkit/types.hpp"

namespace bifkit {

/// Truncated Fourier series q(t) = mean + sum_n (harmonics[n-1] e^{i n omega t} + c.c.).
struct FourierState {
  Vec mean;
  std::vector<CVec> harmonics;  // q_1 .. q_N
  double omega = 1.0;

  [[nodiscard]] Index order() const { return static_cast<Index>(harmonics.size()); }
  [[nodiscard]] Index dim() const { return mean.size(); }
  [[nodiscard]] double period() const;

  /// Zero state with N harmonics.
  static FourierState zeros(Index dim, Index order, double omega);

  /// Real packing (mean, Re q_1, Im q_1, ..., Re q_N, Im q_N, omega).
  [[nodiscard]] Vec pack() const;
  static FourierState unpack(const Vec& x, Index dim, Index order);
};

}  // namespace bifkit
