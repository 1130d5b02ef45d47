#pragma once

#include <string>
#include <vector>

#include "bifkit/problem.hpp"

namespace bifkit {

struct DerivativeError {
  std::string callback;  // e.g. "jacobian", "param_gradient[L]"
  double max_relative_error = 0.0;
};

struct DerivativeReport {
  std::vector<DerivativeError> entries;

  [[nodiscard]] double worst() const;
  /// Throws invalid_configuration for unknown callback names.
  [[nodiscard]] double error(const std::string& callback) const;
};

/// Compares each derivative callback with central differences of the
/// next-lower-order callback along a few seeded random directions. The step is
/// eps^(1/3) * max(1, |q|). Non-finite residual at q -> evaluation_failure.
DerivativeReport check_derivatives(const Problem& pb, const Vec& q, const Parameters& p,
                                   int directions = 3, unsigned seed = 7);

}  // namespace bifkit
