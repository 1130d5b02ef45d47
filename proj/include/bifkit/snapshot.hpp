#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bifkit/bifurcation.hpp"
#include "bifkit/fourier.hpp"
#include "bifkit/problem.hpp"
#include "bifkit/stability.hpp"

namespace bifkit {

enum class SnapshotKind : std::uint32_t { steady = 0, mode = 1, fourier = 2, bifpoint = 3 };
const char* to_string(SnapshotKind k);

/// Binary layout, all integers and floats little-endian:
///   "BFKSNAP\0"  u32 version  u32 kind
///   u32 len + problem name
///   u64 dim  u32 n_params  (u32 len + name, f64 value) * n_params  u32 active
///   u64 multiplicity  u32 n_scalars  f64 * n_scalars
///   f64 payload[dim * multiplicity], column after column
struct Snapshot {
  static constexpr std::uint32_t version = 1;

  SnapshotKind kind = SnapshotKind::steady;
  std::string problem;
  Parameters params;
  std::vector<double> scalars;
  Mat payload;  // dim x multiplicity

  [[nodiscard]] Index dim() const { return payload.rows(); }
  [[nodiscard]] Index multiplicity() const { return payload.cols(); }
};

std::string encode_snapshot(const Snapshot& s);
/// Bad magic, unknown version or a length mismatch -> incompatible_snapshot.
Snapshot decode_snapshot(const std::string& bytes);

void write_snapshot(const std::string& path, const Snapshot& s);
Snapshot read_snapshot(const std::string& path);

/// Problem name, dimension and parameter names must match -> else incompatible_snapshot.
void check_compatible(const Snapshot& s, const Problem& pb);
/// Also requires the given kind.
void check_compatible(const Snapshot& s, const Problem& pb, SnapshotKind kind);

// Steady: column 0 is q; an optional column 1 holds a branch tangent y_q with
// scalars [y_alpha, step].
Snapshot steady_snapshot(const Problem& pb, const Vec& q, const Parameters& p);
Snapshot steady_snapshot(const Problem& pb, const BranchPoint& bp);
BranchPoint branch_point_from(const Snapshot& s);

// Mode: columns Re, Im (per block for Floquet modes); scalars [Re lambda, Im lambda].
Snapshot mode_snapshot(const Problem& pb, const Parameters& p, complex lambda, const CVec& mode);
CVec mode_from(const Snapshot& s);

// Fourier: columns mean, Re q_1, Im q_1, ...; scalars [omega].
Snapshot fourier_snapshot(const Problem& pb, const FourierState& fs, const Parameters& p);
FourierState fourier_from(const Snapshot& s);

// Bifpoint: columns q, Re/Im direct, Re/Im adjoint; scalars
// [kind, omega, Re g, Im g, has_normal_form, Re beta, Im beta, form, Re drift_j, Im drift_j ...].
Snapshot bifpoint_snapshot(const Problem& pb, const BifPoint& b);
BifPoint bifpoint_from(const Snapshot& s);

}  // namespace bifkit
