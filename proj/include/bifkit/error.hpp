#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bifkit {

enum class ErrorKind : std::uint8_t {
  invalid_configuration,
  evaluation_failure,
  dimension_mismatch,
  singular_matrix,
  bordered_singular,
  singular_jacobian,
  deflation_singular,
  tangent_at_singularity,
  singular_shift,
  degenerate_bordering,
  reclassify_candidate,
  resonance,
  no_orbit,
  unsupported_problem,
  degenerate_phase,
  incompatible_snapshot,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` carries the category so
/// callers (and the CLI exit-code mapping) can dispatch without RTTI chains.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by factorizations; `pivot()` is the elimination step that failed.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(long pivot, const std::string& what)
      : Error(ErrorKind::singular_matrix, what), pivot_(pivot) {}

  [[nodiscard]] long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

}  // namespace bifkit
