#include "bifkit/types.hpp"

#include <cmath>
#include <set>

#include "bifkit/error.hpp"

namespace bifkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_configuration: return "invalid-configuration";
    case ErrorKind::evaluation_failure: return "evaluation-failure";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::singular_matrix: return "singular-matrix";
    case ErrorKind::bordered_singular: return "bordered-singular";
    case ErrorKind::singular_jacobian: return "singular-jacobian";
    case ErrorKind::deflation_singular: return "deflation-singular";
    case ErrorKind::tangent_at_singularity: return "tangent-at-singularity";
    case ErrorKind::singular_shift: return "singular-shift";
    case ErrorKind::degenerate_bordering: return "degenerate-bordering";
    case ErrorKind::reclassify_candidate: return "reclassify-candidate";
    case ErrorKind::resonance: return "resonance";
    case ErrorKind::no_orbit: return "no-orbit-on-this-side";
    case ErrorKind::unsupported_problem: return "unsupported-problem";
    case ErrorKind::degenerate_phase: return "degenerate-phase";
    case ErrorKind::incompatible_snapshot: return "incompatible-snapshot";
  }
  return "unknown";
}

Parameters::Parameters(std::vector<std::string> names, Vec values, Index active)
    : names_(std::move(names)), values_(std::move(values)), active_(active) {
  if (static_cast<Index>(names_.size()) != values_.size()) {
    throw Error(ErrorKind::invalid_configuration, "parameter names and values differ in length");
  }
  std::set<std::string> seen(names_.begin(), names_.end());
  if (seen.size() != names_.size()) {
    throw Error(ErrorKind::invalid_configuration, "duplicate parameter name");
  }
  if (!names_.empty()) set_active(active);
}

Index Parameters::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<Index>(i);
  }
  throw Error(ErrorKind::invalid_configuration, "unknown parameter '" + name + "'");
}

bool Parameters::contains(const std::string& name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

void Parameters::set_active(Index i) {
  if (i < 0 || i >= size()) {
    throw Error(ErrorKind::invalid_configuration, "active parameter index out of range");
  }
  active_ = i;
}

Parameters Parameters::with(Index i, double v) const {
  Parameters copy = *this;
  copy.set(i, v);
  return copy;
}

}  // namespace bifkit
