#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "bifkit/bifurcation.hpp"
#include "bifkit/continuation.hpp"
#include "bifkit/derivcheck.hpp"
#include "bifkit/error.hpp"
#include "bifkit/hb.hpp"
#include "bifkit/nlsolve.hpp"
#include "bifkit/snapshot.hpp"
#include "bifkit/stability.hpp"
#include "bifkit/systems.hpp"
#include "bifkit/version.hpp"

namespace bifkit::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Every accepted key with its default. A null default takes a number or null
// (null = unbounded / not given); an empty object takes free-form keys.
const char* kDefaults = R"({
  "problem": {"name": "brusselator_1d", "grid_points": 201, "parameters": {}, "active": ""},
  "output": "",
  "input": {"snapshot": "", "snapshots": [], "branch": ""},
  "newton": {"abs_tol": 1e-10, "rel_tol": 1e-12, "max_iterations": 25, "damping": "none"},
  "steady": {"guess": [], "deflate": [], "order_p": 2.0, "shift_a": 1.0},
  "continuation": {"h0": 0.01, "h_min": 1e-6, "h_max": 0.1, "target_iterations": 3,
                   "param_min": null, "param_max": null, "max_points": 100,
                   "monitor": true, "nev": 6, "shift": [0.0, 0.0], "refine": true},
  "eigs": {"nev": 6, "shift": [0.0, 0.0], "adjoint": false, "modes": true},
  "bifurcation": {"kind": "auto", "omega": null, "min_omega": 1e-6, "normal_form": true,
                  "second": "", "second_min": null, "second_max": null, "max_points": 100,
                  "h0": 0.01, "h_min": 1e-6, "h_max": 0.1},
  "hb": {"order": 4, "offset": 0.01, "collapse_tol": 1e-8,
         "h0": 0.01, "h_min": 1e-6, "h_max": 0.1, "param_min": null, "param_max": null,
         "max_points": 100},
  "floquet": {"nev": 6, "shift": [0.0, 0.0]},
  "check": {"directions": 3, "seed": 7, "tol": 1e-5}
})";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Diverged {
  std::string message;
  json report;
};

void validate(const json& def, const json& val, const std::string& path) {
  auto fail = [&](const std::string& why) { throw UsageError("config key '" + path + "': " + why); };
  if (def.is_object()) {
    if (!val.is_object()) fail("expected a section");
    if (def.empty()) return;
    for (auto it = val.begin(); it != val.end(); ++it) {
      const std::string sub = path.empty() ? it.key() : path + "." + it.key();
      if (!def.contains(it.key())) throw UsageError("unknown config key '" + sub + "'");
      validate(def[it.key()], it.value(), sub);
    }
  } else if (def.is_null()) {
    if (!val.is_null() && !val.is_number()) fail("expected a number or null");
  } else if (def.is_number()) {
    if (!val.is_number()) fail("expected a number");
  } else if (def.is_string()) {
    if (!val.is_string()) fail("expected a string");
  } else if (def.is_boolean()) {
    if (!val.is_boolean()) fail("expected true or false");
  } else if (def.is_array()) {
    if (!val.is_array()) fail("expected a list");
  }
}

void deep_merge(json& into, const json& from) {
  for (auto it = from.begin(); it != from.end(); ++it) {
    if (it.value().is_object() && into.contains(it.key()) && into[it.key()].is_object()) {
      deep_merge(into[it.key()], it.value());
    } else {
      into[it.key()] = it.value();
    }
  }
}

json parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + text + "'");
  const std::string key = text.substr(0, eq), raw = text.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json root = json::object();
  json* node = &root;
  std::stringstream ks(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ks, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
  return root;
}

json build_config(const std::string& path, const std::vector<std::string>& sets) {
  json cfg = json::parse(kDefaults);
  const json def = cfg;
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot read config file " + path);
    json file = json::parse(f, nullptr, false, true);
    if (file.is_discarded()) throw UsageError("config file " + path + " is not valid JSON");
    validate(def, file, "");
    deep_merge(cfg, file);
  }
  for (const auto& s : sets) {
    const json o = parse_override(s);
    validate(def, o, "");
    deep_merge(cfg, o);
  }
  for (auto it = cfg["problem"]["parameters"].begin(); it != cfg["problem"]["parameters"].end(); ++it) {
    if (!it.value().is_number()) throw UsageError("parameter '" + it.key() + "' must be a number");
  }
  return cfg;
}

long integer(const json& v, const char* what) {
  const double d = v.get<double>();
  if (d != std::floor(d)) throw UsageError(std::string(what) + " must be an integer");
  return static_cast<long>(d);
}

double bound(const json& v, double fallback) { return v.is_null() ? fallback : v.get<double>(); }

complex complex_of(const json& v, const char* what) {
  if (v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw UsageError(std::string(what) + " must be [re, im]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { line(header); }
  Csv& operator<<(double v) { return cell(fmt(v)); }
  Csv& operator<<(long v) { return cell(std::to_string(v)); }
  Csv& operator<<(int v) { return cell(std::to_string(v)); }
  Csv& operator<<(bool v) { return cell(v ? "1" : "0"); }
  Csv& operator<<(const std::string& v) { return cell(v); }
  void end_row() {
    if (row_.size() != cols_) throw std::logic_error("csv row width");
    line(row_);
    row_.clear();
  }
  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::invalid_configuration, "cannot write " + path);
    f << text_;
  }

 private:
  Csv& cell(std::string s) {
    row_.push_back(std::move(s));
    return *this;
  }
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += "\n";
  }
  std::size_t cols_;
  std::vector<std::string> row_;
  std::string text_;
};

struct Run {
  json cfg;
  fs::path out;
  std::vector<std::string> outputs;
  json summary = json::object();
  std::ostringstream log;

  std::string file(const std::string& name) {
    outputs.push_back(name);
    return (out / name).string();
  }
};

struct Setup {
  ProblemPtr pb;
  Parameters p;
};

ProblemPtr problem_from(const json& cfg) {
  const std::string name = cfg["problem"]["name"].get<std::string>();
  std::map<std::string, double> opts;
  if (name == "brusselator_1d") opts["grid_points"] = static_cast<double>(integer(cfg["problem"]["grid_points"], "grid_points"));
  return make_problem(name, opts);
}

void apply_overrides(const json& cfg, Parameters& p) {
  for (auto it = cfg["problem"]["parameters"].begin(); it != cfg["problem"]["parameters"].end(); ++it) {
    p.set(it.key(), it.value().get<double>());
  }
  const std::string active = cfg["problem"]["active"].get<std::string>();
  if (!active.empty()) p.set_active(active);
}

Setup setup(const json& cfg, const Snapshot* snap) {
  Setup s;
  s.pb = problem_from(cfg);
  if (snap) {
    check_compatible(*snap, *s.pb);
    s.p = snap->params;
  } else {
    s.p = s.pb->default_parameters();
  }
  apply_overrides(cfg, s.p);
  return s;
}

std::optional<Snapshot> load_input(const json& cfg) {
  const std::string path = cfg["input"]["snapshot"].get<std::string>();
  if (path.empty()) return std::nullopt;
  return read_snapshot(path);
}

NewtonSettings newton_settings(const json& cfg) {
  const json& n = cfg["newton"];
  NewtonSettings s;
  s.abs_tol = n["abs_tol"].get<double>();
  s.rel_tol = n["rel_tol"].get<double>();
  s.max_iterations = static_cast<int>(integer(n["max_iterations"], "newton.max_iterations"));
  const std::string d = n["damping"].get<std::string>();
  if (d == "none") {
    s.damping = Damping::none;
  } else if (d == "backtracking") {
    s.damping = Damping::backtracking;
  } else {
    throw UsageError("newton.damping must be none or backtracking");
  }
  s.validate();
  return s;
}

json history(const std::vector<double>& h) {
  json a = json::array();
  for (double v : h) a.push_back(v);
  return a;
}

// Converged steady state at the setup's parameters, from a snapshot if given.
Vec steady_state(Run& r, const Setup& s, const Snapshot* snap) {
  Vec q0 = snap ? Vec(snap->payload.col(0)) : initial_state(*s.pb, s.p);
  const NewtonResult res = newton_solve(*s.pb, q0, s.p, newton_settings(r.cfg));
  if (!res.converged) {
    throw Diverged{"steady Newton solve did not converge: " + res.message,
                   {{"stage", "steady"}, {"residual_history", history(res.residual_history)}}};
  }
  r.log << "steady state: residual norm " << fmt(res.residual_norm) << " after " << res.iterations
        << " iterations\n";
  return res.q;
}

void require_kind(const Snapshot& s, std::initializer_list<SnapshotKind> kinds) {
  for (SnapshotKind k : kinds) {
    if (s.kind == k) return;
  }
  throw Error(ErrorKind::incompatible_snapshot, std::string("snapshot kind ") + to_string(s.kind) +
                                                    " is not accepted by this command");
}

// ---------------------------------------------------------------------------

int cmd_steady(Run& r) {
  const auto snap = load_input(r.cfg);
  if (snap) require_kind(*snap, {SnapshotKind::steady});
  const Setup s = setup(r.cfg, snap ? &*snap : nullptr);
  Vec q0;
  const json& g = r.cfg["steady"]["guess"];
  if (snap) {
    q0 = snap->payload.col(0);
  } else if (!g.empty()) {
    if (g.size() == 1) {
      q0 = Vec::Constant(s.pb->dim(), g[0].get<double>());
    } else if (static_cast<Index>(g.size()) == s.pb->dim()) {
      q0.resize(s.pb->dim());
      for (Index i = 0; i < q0.size(); ++i) q0[i] = g[static_cast<std::size_t>(i)].get<double>();
    } else {
      throw UsageError("steady.guess must have 1 or dim entries");
    }
  } else {
    q0 = initial_state(*s.pb, s.p);
  }
  DeflationSettings defl;
  defl.order_p = r.cfg["steady"]["order_p"].get<double>();
  defl.shift_a = r.cfg["steady"]["shift_a"].get<double>();
  for (const auto& k : r.cfg["steady"]["deflate"]) {
    if (!k.is_array() || static_cast<Index>(k.size()) != s.pb->dim()) {
      throw UsageError("steady.deflate entries must be lists of length dim");
    }
    Vec v(s.pb->dim());
    for (Index i = 0; i < v.size(); ++i) v[i] = k[static_cast<std::size_t>(i)].get<double>();
    defl.known_solutions.push_back(v);
  }
  const NewtonSettings ns = newton_settings(r.cfg);
  const NewtonResult res = defl.known_solutions.empty() ? newton_solve(*s.pb, q0, s.p, ns)
                                                        : deflated_newton_solve(*s.pb, q0, s.p, ns, defl);
  Csv csv({"iteration", "residual_norm"});
  for (std::size_t i = 0; i < res.residual_history.size(); ++i) {
    csv << static_cast<long>(i) << res.residual_history[i];
    csv.end_row();
  }
  csv.write(r.file("steady.csv"));
  if (!res.converged) {
    throw Diverged{"Newton did not converge: " + res.message,
                   {{"stage", "steady"}, {"residual_history", history(res.residual_history)}}};
  }
  write_snapshot(r.file("steady.bfks"), steady_snapshot(*s.pb, res.q, s.p));
  r.log << "steady: residual norm " << fmt(res.residual_norm) << " after " << res.iterations << " iterations\n";
  r.summary["residual_norm"] = res.residual_norm;
  r.summary["iterations"] = res.iterations;
  return ok;
}

// Last data row of a branch CSV: (index, active parameter value).
std::pair<long, double> last_branch_row(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::incompatible_snapshot, "cannot read branch " + path);
  std::string line, last;
  std::getline(f, line);
  while (std::getline(f, line)) {
    if (!line.empty()) last = line;
  }
  if (last.empty()) throw Error(ErrorKind::incompatible_snapshot, "branch " + path + " has no rows");
  std::stringstream ss(last);
  std::string a, b;
  std::getline(ss, a, ',');
  std::getline(ss, b, ',');
  long idx = 0;
  double val = 0.0;
  if (std::from_chars(a.data(), a.data() + a.size(), idx).ec != std::errc{} ||
      std::from_chars(b.data(), b.data() + b.size(), val).ec != std::errc{}) {
    throw Error(ErrorKind::incompatible_snapshot, "branch " + path + " is malformed");
  }
  return {idx, val};
}

int cmd_trace(Run& r) {
  const json& c = r.cfg["continuation"];
  const auto snap = load_input(r.cfg);
  if (snap) require_kind(*snap, {SnapshotKind::steady});
  const Setup s = setup(r.cfg, snap ? &*snap : nullptr);

  StepControl ctl;
  ctl.h0 = c["h0"].get<double>();
  ctl.h_min = c["h_min"].get<double>();
  ctl.h_max = c["h_max"].get<double>();
  ctl.target_iterations = static_cast<int>(integer(c["target_iterations"], "continuation.target_iterations"));
  ctl.validate();

  BranchPoint start;
  long offset = 0;
  bool restart = false;
  if (snap) {
    start = branch_point_from(*snap);
    start.alpha = s.p;
    if (!start.tangent.empty()) {
      // resume in the direction the stored tangent points
      const double h = start.step_used > 0.0 ? std::min(start.step_used, ctl.h_max) : std::abs(ctl.h0);
      if (start.tangent.y_alpha != 0.0) ctl.h0 = std::copysign(h, start.tangent.y_alpha);
      restart = true;
    } else {
      start = make_branch_point(*s.pb, steady_state(r, s, &*snap), s.p);
    }
    const std::string branch = r.cfg["input"]["branch"].get<std::string>();
    if (!branch.empty()) {
      const auto [idx, val] = last_branch_row(branch);
      if (val != start.alpha.active_value()) {
        throw Error(ErrorKind::incompatible_snapshot, "snapshot does not match the last row of " + branch);
      }
      offset = idx;
    }
  } else {
    start = make_branch_point(*s.pb, steady_state(r, s, nullptr), s.p);
  }

  StopCriteria stop;
  stop.param_min = bound(c["param_min"], -std::numeric_limits<double>::infinity());
  stop.param_max = bound(c["param_max"], std::numeric_limits<double>::infinity());
  stop.max_points = integer(c["max_points"], "continuation.max_points");
  MonitorSettings mon;
  mon.enabled = c["monitor"].get<bool>();
  mon.nev = integer(c["nev"], "continuation.nev");
  mon.shift = complex_of(c["shift"], "continuation.shift");
  mon.refine = c["refine"].get<bool>();

  const Branch br = trace_branch(*s.pb, start, ctl, stop, mon, newton_settings(r.cfg));
  if (br.status == TraceStatus::failed) {
    throw Diverged{"continuation failed: " + br.message, {{"stage", "trace"}, {"points", br.points.size()}}};
  }

  const std::string act = s.p.active_name();
  Csv csv({"index", act, "norm_q", "sigma_max", "omega_at_sigma_max", "step", "iterations", "fold", "hopf",
           "zero_eigenvalue"});
  for (std::size_t i = restart && offset > 0 ? 1 : 0; i < br.points.size(); ++i) {
    const BranchPoint& bp = br.points[i];
    double smax = std::numeric_limits<double>::quiet_NaN(), om = smax;
    for (const complex& l : bp.eigenvalues) {
      if (std::isnan(smax) || l.real() > smax) {
        smax = l.real();
        om = std::abs(l.imag());
      }
    }
    auto has = [&](const char* f) { return std::find(bp.flags.begin(), bp.flags.end(), f) != bp.flags.end(); };
    csv << offset + static_cast<long>(i) << bp.alpha.active_value() << bp.q.norm() << smax << om << bp.step_used
        << bp.corrector_iterations << has("fold") << has("hopf") << has("zero-eigenvalue");
    csv.end_row();
  }
  csv.write(r.file("branch.csv"));

  Csv ev({"event", "before", "kind", act, "sigma", "omega", "refined"});
  for (std::size_t k = 0; k < br.events.size(); ++k) {
    const BranchEvent& e = br.events[k];
    const BranchPoint& at = e.point ? *e.point : br.points[static_cast<std::size_t>(e.before)];
    const complex lam = e.point ? e.lambda : e.lambda_before;
    const int kind = e.kind == "fold" ? 0 : e.kind == "zero-eigenvalue" ? 1 : 2;
    ev << static_cast<long>(k) << offset + static_cast<long>(e.before) << kind << at.alpha.active_value()
       << lam.real() << std::abs(lam.imag()) << e.refined;
    ev.end_row();
    Snapshot es = steady_snapshot(*s.pb, at.q, at.alpha);
    es.scalars = {lam.real(), std::abs(lam.imag())};
    write_snapshot(r.file("event_" + std::to_string(k) + ".bfks"), es);
  }
  ev.write(r.file("events.csv"));
  write_snapshot(r.file("branch_final.bfks"), steady_snapshot(*s.pb, br.points.back()));

  r.summary["status"] = to_string(br.status);
  r.summary["message"] = br.message;
  r.summary["points"] = br.points.size();
  r.summary["events"] = br.events.size();
  r.log << "trace: " << br.points.size() << " points, " << br.events.size() << " events, status "
        << to_string(br.status) << "\n";
  return ok;
}

int cmd_eigs(Run& r) {
  const json& e = r.cfg["eigs"];
  const auto snap = load_input(r.cfg);
  if (snap) require_kind(*snap, {SnapshotKind::steady});
  const Setup s = setup(r.cfg, snap ? &*snap : nullptr);
  const Vec q = steady_state(r, s, snap ? &*snap : nullptr);
  EigsSettings es;
  es.nev = std::min<Index>(integer(e["nev"], "eigs.nev"), s.pb->dim());
  es.shift = complex_of(e["shift"], "eigs.shift");
  es.want_adjoint = e["adjoint"].get<bool>();
  const auto pairs = eigs(*s.pb, q, s.p, es);
  Csv csv({"index", "sigma", "omega", "residual"});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    csv << static_cast<long>(i) << pairs[i].lambda.real() << pairs[i].lambda.imag() << pairs[i].residual_norm;
    csv.end_row();
    if (e["modes"].get<bool>()) {
      write_snapshot(r.file("mode_" + std::to_string(i) + ".bfks"),
                     mode_snapshot(*s.pb, s.p, pairs[i].lambda, pairs[i].direct_mode));
    }
  }
  csv.write(r.file("spectrum.csv"));
  r.summary["stability"] = to_string(classify_stability(pairs));
  r.log << "eigs: " << pairs.size() << " eigenvalues near " << fmt(es.shift.real()) << "+" << fmt(es.shift.imag())
        << "i\n";
  return ok;
}

LocatorSettings locator_settings(const json& cfg) {
  LocatorSettings ls;
  ls.newton = newton_settings(cfg);
  ls.min_omega = cfg["bifurcation"]["min_omega"].get<double>();
  return ls;
}

void attach_normal_form(const Problem& pb, BifPoint& b, Run& r) {
  try {
    b.normal_form = normal_form(pb, b);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::resonance && e.kind() != ErrorKind::singular_matrix) throw;
    r.log << "normal form skipped: " << e.what() << "\n";
  }
}

std::vector<std::string> bif_columns(const std::string& act) {
  return {"index", "kind", act, "omega", "period", "g_abs", "beta_re", "beta_im", "drift_re", "drift_im",
          "supercritical", "iterations"};
}

void bif_row(Csv& csv, long i, const BifPoint& b) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const Index a = b.alpha.active_index();
  const bool nf = b.normal_form.has_value();
  const complex drift = nf ? b.normal_form->eigen_drift[static_cast<std::size_t>(a)] : complex(nan, nan);
  csv << i << static_cast<int>(b.kind) << b.alpha.active_value() << b.omega
      << (b.kind == BifKind::hopf ? 2.0 * M_PI / b.omega : nan) << std::abs(b.g_residual)
      << (nf ? b.normal_form->beta.real() : nan) << (nf ? b.normal_form->beta.imag() : nan) << drift.real()
      << drift.imag() << (nf ? (b.normal_form->supercritical() ? 1.0 : 0.0) : nan) << b.iterations;
  csv.end_row();
}

int cmd_bif_locate(Run& r) {
  const json& bc = r.cfg["bifurcation"];
  std::vector<std::string> sources;
  for (const auto& p : r.cfg["input"]["snapshots"]) sources.push_back(p.get<std::string>());
  if (!r.cfg["input"]["snapshot"].get<std::string>().empty()) {
    sources.push_back(r.cfg["input"]["snapshot"].get<std::string>());
  }
  const std::string kind_name = bc["kind"].get<std::string>();
  if (kind_name != "auto") (void)bif_kind_from_string(kind_name);
  const LocatorSettings ls = locator_settings(r.cfg);

  struct Source {
    Vec q;
    Parameters p;
    std::optional<double> omega;
  };
  ProblemPtr pb = problem_from(r.cfg);
  std::vector<Source> starts;
  if (sources.empty()) {
    const Setup s = setup(r.cfg, nullptr);
    starts.push_back({steady_state(r, s, nullptr), s.p, std::nullopt});
  }
  for (const auto& path : sources) {
    const Snapshot snap = read_snapshot(path);
    require_kind(snap, {SnapshotKind::steady});
    const Setup s = setup(r.cfg, &snap);
    Source src{snap.payload.col(0), s.p, std::nullopt};
    if (snap.multiplicity() == 1 && snap.scalars.size() == 2) src.omega = std::abs(snap.scalars[1]);
    starts.push_back(src);
  }

  const std::string act = starts.front().p.active_name();
  Csv csv(bif_columns(act));
  json failures = json::array();
  long found = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const Source& src = starts[i];
    double omega = bc["omega"].is_null() ? (src.omega ? *src.omega : -1.0) : bc["omega"].get<double>();
    if (omega < 0.0) {
      // no hint: take the eigenvalue nearest the imaginary axis
      const auto pairs = eigs(*pb, src.q, src.p, complex(0.0, 0.0), std::min<Index>(6, pb->dim()));
      complex best = pairs.front().lambda;
      for (const auto& e : pairs) {
        if (std::abs(e.lambda.real()) < std::abs(best.real())) best = e.lambda;
      }
      omega = std::abs(best.imag());
    }
    BifKind kind = kind_name == "auto" ? (omega > ls.min_omega ? BifKind::hopf : BifKind::fold)
                                       : bif_kind_from_string(kind_name);
    try {
      BifPoint b = locate_from_guess(*pb, kind, src.q, src.p, kind == BifKind::hopf ? omega : 0.0, ls);
      if (!b.converged) {
        failures.push_back({{"source", i}, {"message", b.message}, {"g_history", history(b.g_history)}});
        continue;
      }
      if (kind == BifKind::fold && kind_name != "fold" &&
          classify_zero_eigenvalue(*pb, b) == ZeroKind::pitchfork_or_branch_point) {
        b.kind = BifKind::pitchfork;
      }
      if (bc["normal_form"].get<bool>()) attach_normal_form(*pb, b, r);
      bif_row(csv, found, b);
      write_snapshot(r.file("bifpoint_" + std::to_string(found) + ".bfks"), bifpoint_snapshot(*pb, b));
      r.log << "located " << to_string(b.kind) << " at " << act << " = " << fmt(b.alpha.active_value())
            << ", omega = " << fmt(b.omega) << "\n";
      ++found;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_configuration || e.kind() == ErrorKind::incompatible_snapshot) throw;
      failures.push_back({{"source", i}, {"message", e.what()}});
    }
  }
  csv.write(r.file("bifpoints.csv"));
  r.summary["located"] = found;
  r.summary["failed"] = failures.size();
  if (found == 0) throw Diverged{"no bifurcation point converged", {{"stage", "bif-locate"}, {"failures", failures}}};
  return ok;
}

int cmd_bif_trace(Run& r) {
  const json& bc = r.cfg["bifurcation"];
  const auto snap = load_input(r.cfg);
  if (!snap) throw UsageError("bif-trace needs input.snapshot (a bifpoint snapshot)");
  require_kind(*snap, {SnapshotKind::bifpoint});
  ProblemPtr pb = problem_from(r.cfg);
  check_compatible(*snap, *pb);
  BifPoint b = bifpoint_from(*snap);
  const std::string active = r.cfg["problem"]["active"].get<std::string>();
  if (!active.empty()) b.alpha.set_active(active);
  const std::string second = bc["second"].get<std::string>();
  if (second.empty()) throw UsageError("bif-trace needs bifurcation.second");
  StepControl ctl;
  ctl.h0 = bc["h0"].get<double>();
  ctl.h_min = bc["h_min"].get<double>();
  ctl.h_max = bc["h_max"].get<double>();
  ctl.validate();
  CurveStop stop;
  stop.second_min = bound(bc["second_min"], -std::numeric_limits<double>::infinity());
  stop.second_max = bound(bc["second_max"], std::numeric_limits<double>::infinity());
  stop.max_points = integer(bc["max_points"], "bifurcation.max_points");

  const BifCurve curve = trace_bifurcation_curve(*pb, b, second, ctl, stop, locator_settings(r.cfg));
  if (curve.status == TraceStatus::failed || curve.points.empty()) {
    throw Diverged{"bifurcation curve failed: " + curve.message, {{"stage", "bif-trace"}}};
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Csv csv({"index", curve.primary_parameter, curve.second_parameter, "omega", "period", "g_abs", "beta_re",
           "beta_im", "bautin", "bogdanov_takens", "cusp", "fold_hopf"});
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const BifPoint& p = curve.points[i];
    auto flag = [&](const char* t) {
      for (const auto& e : curve.codim2_events) {
        if (static_cast<std::size_t>(e.index) == i && e.type == t) return true;
      }
      return false;
    };
    const bool nf = p.normal_form.has_value();
    csv << static_cast<long>(i) << p.alpha.get(curve.primary_parameter) << p.alpha.get(curve.second_parameter)
        << p.omega << (p.kind == BifKind::hopf ? 2.0 * M_PI / p.omega : nan) << std::abs(p.g_residual)
        << (nf ? p.normal_form->beta.real() : nan) << (nf ? p.normal_form->beta.imag() : nan) << flag("bautin")
        << flag("bogdanov-takens-candidate") << flag("cusp-candidate") << flag("fold-hopf-candidate");
    csv.end_row();
  }
  csv.write(r.file("curve.csv"));
  write_snapshot(r.file("curve_final.bfks"), bifpoint_snapshot(*pb, curve.points.back()));
  json events = json::array();
  for (const auto& e : curve.codim2_events) events.push_back({{"index", e.index}, {"type", e.type}});
  r.summary["status"] = to_string(curve.status);
  r.summary["message"] = curve.message;
  r.summary["points"] = curve.points.size();
  r.summary["codim2_events"] = events;
  return ok;
}

struct OrbitStart {
  ProblemPtr pb;
  FourierState guess;
  Parameters p;
};

OrbitStart orbit_start(Run& r, Index order) {
  const auto snap = load_input(r.cfg);
  if (!snap) throw UsageError("this command needs input.snapshot (a Hopf bifpoint or a fourier snapshot)");
  require_kind(*snap, {SnapshotKind::bifpoint, SnapshotKind::fourier});
  OrbitStart o;
  o.pb = problem_from(r.cfg);
  check_compatible(*snap, *o.pb);
  if (snap->kind == SnapshotKind::fourier) {
    o.guess = fourier_from(*snap);
    o.p = snap->params;
    apply_overrides(r.cfg, o.p);
    return o;
  }
  BifPoint b = bifpoint_from(*snap);
  if (b.kind != BifKind::hopf) throw UsageError("harmonic balance needs a Hopf bifpoint");
  const std::string active = r.cfg["problem"]["active"].get<std::string>();
  if (!active.empty()) b.alpha.set_active(active);
  if (!b.normal_form) b.normal_form = normal_form(*o.pb, b);
  const double offset = r.cfg["hb"]["offset"].get<double>();
  Vec d = Vec::Zero(b.alpha.size());
  d[b.alpha.active_index()] = offset;
  const WeaklyNonlinear wn = weakly_nonlinear_predict(b, d, order);
  o.guess = *wn.orbit;
  o.p = b.alpha;
  o.p.set_active_value(b.alpha.active_value() + offset);
  r.log << "weakly nonlinear seed: amplitude " << fmt(wn.amplitude) << ", omega " << fmt(wn.omega) << "\n";
  return o;
}

HBResult solve_orbit(Run& r, const OrbitStart& o, Index order) {
  HBSettings hs;
  hs.order = order;
  hs.newton = newton_settings(r.cfg);
  hs.collapse_tol = r.cfg["hb"]["collapse_tol"].get<double>();
  hs.validate();
  HBResult res = hb_solve(*o.pb, o.guess, o.p, hs);
  if (!res.converged) {
    throw Diverged{std::string(res.collapsed ? "orbit collapsed to a steady state: " : "harmonic balance diverged: ") +
                       res.message,
                   {{"stage", "hb"}, {"collapsed", res.collapsed}, {"residual_history", history(res.residual_history)}}};
  }
  r.log << "hb: converged in " << res.iterations << " iterations, omega " << fmt(res.state.omega) << "\n";
  return res;
}

std::vector<std::string> orbit_columns(const std::string& act, Index N) {
  std::vector<std::string> h = {"index", act, "omega", "period"};
  for (Index k = 1; k <= N; ++k) h.push_back("norm_q" + std::to_string(k));
  h.push_back("iterations");
  return h;
}

void orbit_row(Csv& csv, long i, const FourierState& fs, double alpha, int its) {
  csv << i << alpha << fs.omega << fs.period();
  for (const auto& h : fs.harmonics) csv << h.norm();
  csv << its;
  csv.end_row();
}

int cmd_hb_solve(Run& r) {
  const Index N = integer(r.cfg["hb"]["order"], "hb.order");
  const OrbitStart o = orbit_start(r, N);
  const HBResult res = solve_orbit(r, o, N);
  Csv csv(orbit_columns(o.p.active_name(), N));
  orbit_row(csv, 0, res.state, o.p.active_value(), res.iterations);
  csv.write(r.file("orbit.csv"));
  write_snapshot(r.file("orbit.bfks"), fourier_snapshot(*o.pb, res.state, o.p));
  r.summary["omega"] = res.state.omega;
  r.summary["period"] = res.state.period();
  return ok;
}

int cmd_hb_trace(Run& r) {
  const json& h = r.cfg["hb"];
  const Index N = integer(h["order"], "hb.order");
  const OrbitStart o = orbit_start(r, N);
  const HBResult res = solve_orbit(r, o, N);
  StepControl ctl;
  ctl.h0 = h["h0"].get<double>();
  ctl.h_min = h["h_min"].get<double>();
  ctl.h_max = h["h_max"].get<double>();
  ctl.validate();
  StopCriteria stop;
  stop.param_min = bound(h["param_min"], -std::numeric_limits<double>::infinity());
  stop.param_max = bound(h["param_max"], std::numeric_limits<double>::infinity());
  stop.max_points = integer(h["max_points"], "hb.max_points");
  const HBBranch br = hb_trace_branch(*o.pb, res.state, o.p, ctl, stop, newton_settings(r.cfg));
  if (br.status == TraceStatus::failed || br.points.empty()) {
    throw Diverged{"orbit continuation failed: " + br.message, {{"stage", "hb-trace"}}};
  }
  Csv csv(orbit_columns(br.active_parameter, N));
  for (std::size_t i = 0; i < br.points.size(); ++i) {
    const HBPoint& pt = br.points[i];
    orbit_row(csv, static_cast<long>(i), pt.state, pt.alpha.active_value(), pt.iterations);
    write_snapshot(r.file("orbit_" + std::to_string(i) + ".bfks"), fourier_snapshot(*o.pb, pt.state, pt.alpha));
  }
  csv.write(r.file("hb_branch.csv"));
  write_snapshot(r.file("orbit_final.bfks"), fourier_snapshot(*o.pb, br.points.back().state, br.points.back().alpha));
  r.summary["status"] = to_string(br.status);
  r.summary["message"] = br.message;
  r.summary["points"] = br.points.size();
  return ok;
}

int cmd_floquet(Run& r) {
  const auto snap = load_input(r.cfg);
  if (!snap) throw UsageError("floquet needs input.snapshot (a fourier snapshot)");
  require_kind(*snap, {SnapshotKind::fourier});
  const Setup s = setup(r.cfg, &*snap);
  const FourierState fs = fourier_from(*snap);
  const json& f = r.cfg["floquet"];
  const Index nev = integer(f["nev"], "floquet.nev");
  const auto pairs = floquet(*s.pb, fs, s.p, complex_of(f["shift"], "floquet.shift"), nev);
  Csv csv({"index", "sigma", "omega", "principal", "phase_mode", "alignment", "residual"});
  bool stable = true;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const FloquetPair& fp = pairs[i];
    csv << static_cast<long>(i) << fp.exponent.real() << fp.exponent.imag() << fp.principal << fp.phase_mode
        << fp.alignment << fp.residual_norm;
    csv.end_row();
    CVec flat(fs.dim() * static_cast<Index>(fp.mode.size()));
    for (std::size_t b = 0; b < fp.mode.size(); ++b) flat.segment(static_cast<Index>(b) * fs.dim(), fs.dim()) = fp.mode[b];
    write_snapshot(r.file("floquet_mode_" + std::to_string(i) + ".bfks"), mode_snapshot(*s.pb, s.p, fp.exponent, flat));
    if (fp.principal && !fp.phase_mode && fp.exponent.real() >= 0.0) stable = false;
  }
  csv.write(r.file("floquet.csv"));
  // the orbit as read, written back out
  write_snapshot(r.file("orbit.bfks"), fourier_snapshot(*s.pb, fs, s.p));
  r.summary["stable"] = stable;
  r.summary["phase_mode_residual"] = phase_mode_residual(*s.pb, fs, s.p);
  return ok;
}

int cmd_check(Run& r) {
  const json& c = r.cfg["check"];
  const auto snap = load_input(r.cfg);
  if (snap) require_kind(*snap, {SnapshotKind::steady});
  const Setup s = setup(r.cfg, snap ? &*snap : nullptr);
  const Vec q = snap ? Vec(snap->payload.col(0)) : initial_state(*s.pb, s.p);
  const DerivativeReport rep = check_derivatives(*s.pb, q, s.p, static_cast<int>(integer(c["directions"], "check.directions")),
                                                 static_cast<unsigned>(integer(c["seed"], "check.seed")));
  Csv csv({"callback", "max_relative_error"});
  for (const auto& e : rep.entries) {
    csv << e.callback << e.max_relative_error;
    csv.end_row();
  }
  csv.write(r.file("check.csv"));
  const double tol = c["tol"].get<double>();
  r.summary["worst"] = rep.worst();
  r.summary["tol"] = tol;
  r.log << "check: worst relative error " << fmt(rep.worst()) << "\n";
  if (rep.worst() > tol) {
    std::cerr << "derivative check failed: worst relative error " << fmt(rep.worst()) << " > " << fmt(tol) << "\n";
    return other;
  }
  return ok;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_configuration:
    case ErrorKind::unsupported_problem:
      return usage;
    case ErrorKind::incompatible_snapshot:
      return incompatible;
    case ErrorKind::singular_matrix:
    case ErrorKind::bordered_singular:
    case ErrorKind::singular_jacobian:
    case ErrorKind::deflation_singular:
    case ErrorKind::tangent_at_singularity:
    case ErrorKind::singular_shift:
    case ErrorKind::degenerate_bordering:
    case ErrorKind::reclassify_candidate:
    case ErrorKind::resonance:
    case ErrorKind::no_orbit:
    case ErrorKind::degenerate_phase:
      return divergence;
    default:
      return other;
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"bifkit: continuation, bifurcation and harmonic-balance analysis"};
  app.set_version_flag("--version", bifkit::version);
  app.require_subcommand(1);
  std::string config_path, out_flag;
  std::vector<std::string> sets;
  using Cmd = int (*)(Run&);
  const std::vector<std::tuple<const char*, const char*, Cmd>> commands = {
      {"steady", "steady state by Newton, optionally deflated", cmd_steady},
      {"trace", "continue a steady branch, monitoring eigenvalues", cmd_trace},
      {"eigs", "leading eigenvalues of a steady state", cmd_eigs},
      {"bif-locate", "locate fold, pitchfork or Hopf points", cmd_bif_locate},
      {"bif-trace", "trace a bifurcation point in a second parameter", cmd_bif_trace},
      {"hb-solve", "harmonic-balance periodic orbit", cmd_hb_solve},
      {"hb-trace", "continue a periodic orbit", cmd_hb_trace},
      {"floquet", "Floquet exponents of a periodic orbit by Hill's method", cmd_floquet},
      {"check", "compare derivative callbacks against finite differences", cmd_check},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, desc, fn] : commands) {
    CLI::App* sc = app.add_subcommand(name, desc);
    sc->add_option("-c,--config", config_path, "JSON config file");
    sc->add_option("-s,--set", sets, "override: section.key=value (repeatable)");
    sc->add_option("-o,--output", out_flag, "output directory (default: config, then $BIFKIT_OUTPUT_DIR, then .)");
    subs.push_back(sc);
  }

  std::vector<std::string> argv_store = {"bifkit"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : usage;
  }

  std::size_t which = 0;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (subs[i]->parsed()) which = i;
  }
  const std::string name = std::get<0>(commands[which]);

  const auto t0 = std::chrono::steady_clock::now();
  Run r;
  int code = ok;
  std::string message;
  json report;
  bool have_out = false;
  try {
    r.cfg = build_config(config_path, sets);
    std::string out = out_flag;
    if (out.empty()) out = r.cfg["output"].get<std::string>();
    if (out.empty()) {
      const char* env = std::getenv("BIFKIT_OUTPUT_DIR");
      out = env ? env : ".";
    }
    r.out = out;
    fs::create_directories(r.out);
    have_out = true;
    code = std::get<2>(commands[which])(r);
  } catch (const UsageError& e) {
    code = usage;
    message = e.what();
  } catch (const Diverged& d) {
    code = divergence;
    message = d.message;
    report = d.report;
  } catch (const SingularJacobianError& e) {
    code = divergence;
    message = e.what();
  } catch (const Error& e) {
    code = exit_code_for(e.kind());
    message = e.what();
  } catch (const json::exception& e) {
    code = usage;
    message = std::string("config: ") + e.what();
  } catch (const fs::filesystem_error& e) {
    code = other;
    message = e.what();
  } catch (const std::exception& e) {
    code = other;
    message = e.what();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!message.empty()) std::cerr << "bifkit " << name << ": " << message << "\n";
  if (!have_out) return code;
  try {
    if (code == divergence) {
      json d = {{"command", name}, {"message", message}, {"details", report.is_null() ? json::object() : report}};
      write_text(r.out / "divergence.json", d.dump(2) + "\n");
      r.outputs.push_back("divergence.json");
      std::cerr << "divergence report: " << (r.out / "divergence.json").string() << "\n";
    }
    write_text(r.out / "run.log", r.log.str());
    json prov = {{"command", name},
                 {"arguments", args},
                 {"version", bifkit::version},
                 {"config", r.cfg},
                 {"config_digest", digest(r.cfg.dump())},
                 {"outputs", r.outputs},
                 {"summary", r.summary},
                 {"exit_code", code},
                 {"message", message},
                 {"timings", {{"wall_seconds", wall}}}};
    write_text(r.out / "run.json", prov.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "bifkit: could not write provenance: " << e.what() << "\n";
    if (code == ok) code = other;
  }
  return code;
}

}  // namespace bifkit::cli
