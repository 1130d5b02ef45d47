#include "bifkit/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bifkit/error.hpp"

namespace bifkit {

namespace {

constexpr char kMagic[8] = {'B', 'F', 'K', 'S', 'N', 'A', 'P', '\0'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void magic() {
    need(8);
    if (std::memcmp(in_.data(), kMagic, 8) != 0) throw Error(ErrorKind::incompatible_snapshot, "not a snapshot file");
    pos_ = 8;
  }
  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorKind::incompatible_snapshot, "truncated snapshot");
  }
  std::uint64_t get(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

Snapshot base(const Problem& pb, const Parameters& p, SnapshotKind kind, Index cols) {
  Snapshot s;
  s.kind = kind;
  s.problem = pb.name();
  s.params = p;
  s.payload = Mat::Zero(pb.dim(), cols);
  return s;
}

void require_kind(const Snapshot& s, SnapshotKind k) {
  if (s.kind != k) {
    throw Error(ErrorKind::incompatible_snapshot,
                std::string("expected a ") + to_string(k) + " snapshot, got " + to_string(s.kind));
  }
}

}  // namespace

const char* to_string(SnapshotKind k) {
  switch (k) {
    case SnapshotKind::steady: return "steady";
    case SnapshotKind::mode: return "mode";
    case SnapshotKind::fourier: return "fourier";
    case SnapshotKind::bifpoint: return "bifpoint";
  }
  return "?";
}

std::string encode_snapshot(const Snapshot& s) {
  Writer w;
  w.raw(kMagic, 8);
  w.u32(Snapshot::version);
  w.u32(static_cast<std::uint32_t>(s.kind));
  w.str(s.problem);
  w.u64(static_cast<std::uint64_t>(s.payload.rows()));
  w.u32(static_cast<std::uint32_t>(s.params.size()));
  for (Index i = 0; i < s.params.size(); ++i) {
    w.str(s.params.names()[static_cast<std::size_t>(i)]);
    w.f64(s.params[i]);
  }
  w.u32(static_cast<std::uint32_t>(s.params.size() ? s.params.active_index() : 0));
  w.u64(static_cast<std::uint64_t>(s.payload.cols()));
  w.u32(static_cast<std::uint32_t>(s.scalars.size()));
  for (double v : s.scalars) w.f64(v);
  for (Index c = 0; c < s.payload.cols(); ++c) {
    for (Index r = 0; r < s.payload.rows(); ++r) w.f64(s.payload(r, c));
  }
  return w.take();
}

Snapshot decode_snapshot(const std::string& bytes) {
  Reader r(bytes);
  r.magic();
  const std::uint32_t ver = r.u32();
  if (ver != Snapshot::version) {
    throw Error(ErrorKind::incompatible_snapshot, "unsupported snapshot version " + std::to_string(ver));
  }
  Snapshot s;
  const std::uint32_t kind = r.u32();
  if (kind > 3) throw Error(ErrorKind::incompatible_snapshot, "unknown snapshot kind");
  s.kind = static_cast<SnapshotKind>(kind);
  s.problem = r.str();
  const std::uint64_t dim = r.u64();
  const std::uint32_t np = r.u32();
  std::vector<std::string> names;
  Vec values(np);
  for (std::uint32_t i = 0; i < np; ++i) {
    names.push_back(r.str());
    values[i] = r.f64();
  }
  const std::uint32_t active = r.u32();
  if (np > 0) {
    if (active >= np) throw Error(ErrorKind::incompatible_snapshot, "active parameter out of range");
    s.params = Parameters(names, values, active);
  }
  const std::uint64_t mult = r.u64();
  const std::uint32_t ns = r.u32();
  for (std::uint32_t i = 0; i < ns; ++i) s.scalars.push_back(r.f64());
  if (r.remaining() != 8 * dim * mult) {
    throw Error(ErrorKind::incompatible_snapshot, "payload length does not match dim * multiplicity");
  }
  s.payload.resize(static_cast<Index>(dim), static_cast<Index>(mult));
  for (Index c = 0; c < s.payload.cols(); ++c) {
    for (Index i = 0; i < s.payload.rows(); ++i) s.payload(i, c) = r.f64();
  }
  return s;
}

void write_snapshot(const std::string& path, const Snapshot& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::invalid_configuration, "cannot write " + path);
  const std::string b = encode_snapshot(s);
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!f) throw Error(ErrorKind::invalid_configuration, "write failed: " + path);
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::incompatible_snapshot, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_snapshot(ss.str());
}

void check_compatible(const Snapshot& s, const Problem& pb) {
  if (s.problem != pb.name()) {
    throw Error(ErrorKind::incompatible_snapshot, "snapshot is for " + s.problem + ", not " + pb.name());
  }
  if (s.dim() != pb.dim()) {
    throw Error(ErrorKind::incompatible_snapshot,
                "snapshot dim " + std::to_string(s.dim()) + " != problem dim " + std::to_string(pb.dim()));
  }
  if (s.params.names() != pb.default_parameters().names()) {
    throw Error(ErrorKind::incompatible_snapshot, "snapshot parameter names differ from the problem's");
  }
}

void check_compatible(const Snapshot& s, const Problem& pb, SnapshotKind kind) {
  require_kind(s, kind);
  check_compatible(s, pb);
}

Snapshot steady_snapshot(const Problem& pb, const Vec& q, const Parameters& p) {
  Snapshot s = base(pb, p, SnapshotKind::steady, 1);
  s.payload.col(0) = q;
  return s;
}

Snapshot steady_snapshot(const Problem& pb, const BranchPoint& bp) {
  Snapshot s = base(pb, bp.alpha, SnapshotKind::steady, bp.tangent.empty() ? 1 : 2);
  s.payload.col(0) = bp.q;
  if (!bp.tangent.empty()) {
    s.payload.col(1) = bp.tangent.y_q;
    s.scalars = {bp.tangent.y_alpha, bp.step_used};
  }
  return s;
}

BranchPoint branch_point_from(const Snapshot& s) {
  require_kind(s, SnapshotKind::steady);
  BranchPoint bp;
  bp.q = s.payload.col(0);
  bp.alpha = s.params;
  if (s.multiplicity() >= 2 && s.scalars.size() >= 2) {
    bp.tangent.y_q = s.payload.col(1);
    bp.tangent.y_alpha = s.scalars[0];
    bp.step_used = s.scalars[1];
  }
  return bp;
}

Snapshot mode_snapshot(const Problem& pb, const Parameters& p, complex lambda, const CVec& mode) {
  const Index n = pb.dim();
  if (mode.size() % n != 0) throw Error(ErrorKind::dimension_mismatch, "mode length is not a multiple of dim");
  const Index blocks = mode.size() / n;
  Snapshot s = base(pb, p, SnapshotKind::mode, 2 * blocks);
  for (Index b = 0; b < blocks; ++b) {
    s.payload.col(2 * b) = mode.segment(b * n, n).real();
    s.payload.col(2 * b + 1) = mode.segment(b * n, n).imag();
  }
  s.scalars = {lambda.real(), lambda.imag()};
  return s;
}

CVec mode_from(const Snapshot& s) {
  require_kind(s, SnapshotKind::mode);
  const Index n = s.dim(), blocks = s.multiplicity() / 2;
  CVec m(n * blocks);
  for (Index b = 0; b < blocks; ++b) {
    for (Index i = 0; i < n; ++i) m[b * n + i] = complex(s.payload(i, 2 * b), s.payload(i, 2 * b + 1));
  }
  return m;
}

Snapshot fourier_snapshot(const Problem& pb, const FourierState& fs, const Parameters& p) {
  if (fs.dim() != pb.dim()) throw Error(ErrorKind::dimension_mismatch, "fourier state dim");
  Snapshot s = base(pb, p, SnapshotKind::fourier, 1 + 2 * fs.order());
  s.payload.col(0) = fs.mean;
  for (Index k = 0; k < fs.order(); ++k) {
    s.payload.col(1 + 2 * k) = fs.harmonics[static_cast<std::size_t>(k)].real();
    s.payload.col(2 + 2 * k) = fs.harmonics[static_cast<std::size_t>(k)].imag();
  }
  s.scalars = {fs.omega};
  return s;
}

FourierState fourier_from(const Snapshot& s) {
  require_kind(s, SnapshotKind::fourier);
  if (s.multiplicity() % 2 != 1 || s.scalars.empty()) {
    throw Error(ErrorKind::incompatible_snapshot, "malformed fourier snapshot");
  }
  const Index N = (s.multiplicity() - 1) / 2;
  FourierState fs = FourierState::zeros(s.dim(), N, s.scalars[0]);
  fs.mean = s.payload.col(0);
  for (Index k = 0; k < N; ++k) {
    auto& h = fs.harmonics[static_cast<std::size_t>(k)];
    for (Index i = 0; i < s.dim(); ++i) h[i] = complex(s.payload(i, 1 + 2 * k), s.payload(i, 2 + 2 * k));
  }
  return fs;
}

Snapshot bifpoint_snapshot(const Problem& pb, const BifPoint& b) {
  Snapshot s = base(pb, b.alpha, SnapshotKind::bifpoint, 5);
  s.payload.col(0) = b.q;
  if (b.direct_mode.size() == pb.dim()) {
    s.payload.col(1) = b.direct_mode.real();
    s.payload.col(2) = b.direct_mode.imag();
  }
  if (b.adjoint_mode.size() == pb.dim()) {
    s.payload.col(3) = b.adjoint_mode.real();
    s.payload.col(4) = b.adjoint_mode.imag();
  }
  s.scalars = {static_cast<double>(b.kind), b.omega, b.g_residual.real(), b.g_residual.imag(),
               b.normal_form ? 1.0 : 0.0};
  if (b.normal_form) {
    const NormalForm& nf = *b.normal_form;
    s.scalars.push_back(nf.beta.real());
    s.scalars.push_back(nf.beta.imag());
    s.scalars.push_back(static_cast<double>(nf.form));
    for (const complex& d : nf.eigen_drift) {
      s.scalars.push_back(d.real());
      s.scalars.push_back(d.imag());
    }
  }
  return s;
}

BifPoint bifpoint_from(const Snapshot& s) {
  require_kind(s, SnapshotKind::bifpoint);
  if (s.multiplicity() != 5 || s.scalars.size() < 5) {
    throw Error(ErrorKind::incompatible_snapshot, "malformed bifpoint snapshot");
  }
  BifPoint b;
  const int kind = static_cast<int>(s.scalars[0]);
  if (kind < 0 || kind > 2) throw Error(ErrorKind::incompatible_snapshot, "unknown bifurcation kind");
  b.kind = static_cast<BifKind>(kind);
  b.q = s.payload.col(0);
  b.alpha = s.params;
  b.omega = s.scalars[1];
  b.direct_mode = s.payload.col(1).cast<complex>() + complex(0.0, 1.0) * s.payload.col(2).cast<complex>();
  b.adjoint_mode = s.payload.col(3).cast<complex>() + complex(0.0, 1.0) * s.payload.col(4).cast<complex>();
  b.g_residual = complex(s.scalars[2], s.scalars[3]);
  b.converged = true;
  if (s.scalars[4] != 0.0) {
    if (s.scalars.size() != 8 + 2 * static_cast<std::size_t>(s.params.size())) {
      throw Error(ErrorKind::incompatible_snapshot, "malformed normal-form block");
    }
    NormalForm nf;
    nf.beta = complex(s.scalars[5], s.scalars[6]);
    nf.form = static_cast<FormKind>(static_cast<int>(s.scalars[7]));
    for (Index j = 0; j < s.params.size(); ++j) {
      nf.eigen_drift.emplace_back(s.scalars[8 + 2 * static_cast<std::size_t>(j)],
                                  s.scalars[9 + 2 * static_cast<std::size_t>(j)]);
    }
    b.normal_form = nf;
  }
  return b;
}

}  // namespace bifkit
