#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bifkit/error.hpp"
#include "bifkit/snapshot.hpp"
#include "bifkit/systems.hpp"
#include "cli.hpp"

using namespace bifkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bifkit_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(std::vector<std::string> args) { return bifkit::cli::run(args); }

std::vector<std::string> table(const fs::path& p) {
  std::vector<std::string> rows;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) rows.push_back(line);
  return rows;
}

std::vector<double> row_values(const std::string& row) {
  std::vector<double> v;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
  return v;
}

Vec random_vec(Index n, std::mt19937& rng) {
  std::normal_distribution<double> d;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng) * std::pow(10.0, d(rng) * 50);
  return v;
}

}  // namespace

TEST_CASE("snapshot round-trip is bit-exact for every kind") {
  std::mt19937 rng(4);
  auto br = brusselator_1d(13);
  Parameters p = br->default_parameters();
  p.set("L", 0.1 + 1e-17);
  const Index n = br->dim();
  auto same = [](const Snapshot& a, const Snapshot& b) {
    return encode_snapshot(a) == encode_snapshot(b) && a.kind == b.kind && a.problem == b.problem &&
           a.params.names() == b.params.names() && a.params.values() == b.params.values() &&
           a.params.active_index() == b.params.active_index() && a.scalars == b.scalars && a.payload == b.payload;
  };

  const Snapshot s1 = steady_snapshot(*br, random_vec(n, rng), p);
  CHECK(same(s1, decode_snapshot(encode_snapshot(s1))));

  BranchPoint bp;
  bp.q = random_vec(n, rng);
  bp.alpha = p;
  bp.tangent.y_q = random_vec(n, rng);
  bp.tangent.y_alpha = -0.3;
  bp.step_used = 0.0125;
  const BranchPoint back = branch_point_from(decode_snapshot(encode_snapshot(steady_snapshot(*br, bp))));
  CHECK(back.q == bp.q);
  CHECK(back.tangent.y_q == bp.tangent.y_q);
  CHECK(back.tangent.y_alpha == bp.tangent.y_alpha);
  CHECK(back.step_used == bp.step_used);

  CVec mode = random_vec(3 * n, rng).cast<complex>() + complex(0, 1) * random_vec(3 * n, rng).cast<complex>();
  const Snapshot s2 = mode_snapshot(*br, p, complex(-0.25, 3.5), mode);
  const Snapshot s2b = decode_snapshot(encode_snapshot(s2));
  CHECK(same(s2, s2b));
  CHECK(mode_from(s2b) == mode);

  FourierState fs = FourierState::zeros(n, 3, 2.0 / 3.0);
  fs.mean = random_vec(n, rng);
  for (auto& h : fs.harmonics) h = random_vec(n, rng).cast<complex>() + complex(0, 1) * random_vec(n, rng).cast<complex>();
  const FourierState fb = fourier_from(decode_snapshot(encode_snapshot(fourier_snapshot(*br, fs, p))));
  CHECK(fb.mean == fs.mean);
  CHECK(fb.omega == fs.omega);
  for (std::size_t k = 0; k < 3; ++k) CHECK(fb.harmonics[k] == fs.harmonics[k]);

  BifPoint b;
  b.kind = BifKind::hopf;
  b.q = random_vec(n, rng);
  b.alpha = p;
  b.omega = 2.1395;
  b.direct_mode = mode.head(n);
  b.adjoint_mode = mode.tail(n);
  b.g_residual = complex(1e-13, -2e-14);
  NormalForm nf;
  nf.form = FormKind::cubic;
  nf.beta = complex(-0.01, 0.02);
  for (Index j = 0; j < p.size(); ++j) nf.eigen_drift.emplace_back(0.1 * j, -0.2 * j);
  b.normal_form = nf;
  const Snapshot s4 = bifpoint_snapshot(*br, b);
  const Snapshot s4b = decode_snapshot(encode_snapshot(s4));
  CHECK(same(s4, s4b));
  const BifPoint bb = bifpoint_from(s4b);
  CHECK(bb.q == b.q);
  CHECK(bb.direct_mode == b.direct_mode);
  CHECK(bb.adjoint_mode == b.adjoint_mode);
  CHECK(bb.normal_form->beta == nf.beta);
  CHECK(bb.normal_form->eigen_drift == nf.eigen_drift);
  CHECK(bb.normal_form->form == FormKind::cubic);
}

TEST_CASE("malformed snapshots are rejected as incompatible") {
  auto b0 = brusselator_0d();
  const std::string good = encode_snapshot(steady_snapshot(*b0, Vec::Ones(2), b0->default_parameters()));
  auto kind_of = [](const std::string& bytes) {
    try {
      (void)decode_snapshot(bytes);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::evaluation_failure;
  };
  CHECK(kind_of(good.substr(0, good.size() - 1)) == ErrorKind::incompatible_snapshot);
  CHECK(kind_of(good + "x") == ErrorKind::incompatible_snapshot);
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(kind_of(bad_magic) == ErrorKind::incompatible_snapshot);
  std::string bad_version = good;
  bad_version[8] = 2;
  CHECK(kind_of(bad_version) == ErrorKind::incompatible_snapshot);

  const Snapshot s = decode_snapshot(good);
  auto fold = scalar_fold();
  CHECK_THROWS_AS(check_compatible(s, *fold), Error);
  CHECK_THROWS_AS(check_compatible(s, *b0, SnapshotKind::fourier), Error);
  CHECK_NOTHROW(check_compatible(s, *b0, SnapshotKind::steady));
}

TEST_CASE("cli: usage errors exit 2") {
  const fs::path d = scratch("usage");
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"frobnicate"}) == 2);
  CHECK(run_cli({"steady", "-o", d.string(), "--set", "nosuch.key=1"}) == 2);
  CHECK(run_cli({"steady", "-o", d.string(), "--set", "newton.max_iterations=many"}) == 2);
  CHECK(run_cli({"steady", "-o", d.string(), "--set", "problem.name=nosuch"}) == 2);
  CHECK(run_cli({"steady", "-o", d.string(), "--set", "problem.parameters.Q=1"}) == 2);
  CHECK(run_cli({"steady", "-o", d.string(), "--config", (d / "missing.json").string()}) == 2);
  CHECK(run_cli({"--help"}) == 0);
}

TEST_CASE("cli: steady solve, divergence report, provenance") {
  const fs::path d = scratch("steady");
  CHECK(run_cli({"steady", "-o", (d / "ok").string(), "--set", "problem.grid_points=51"}) == 0);
  CHECK(fs::exists(d / "ok" / "steady.bfks"));
  const std::string prov = slurp(d / "ok" / "run.json");
  CHECK(prov.find("\"version\"") != std::string::npos);
  CHECK(prov.find("\"wall_seconds\"") != std::string::npos);
  CHECK(prov.find("\"grid_points\": 51") != std::string::npos);
  const auto rows = table(d / "ok" / "steady.csv");
  CHECK(row_values(rows.back())[1] < 1e-10);

  // q^2 + 1 = 0 has no real root
  CHECK(run_cli({"steady", "-o", (d / "div").string(), "--set", "problem.name=scalar_fold", "--set",
             "problem.parameters.a1=1", "--set", "steady.guess=[0.5]"}) == 3);
  CHECK(fs::exists(d / "div" / "divergence.json"));
  CHECK(slurp(d / "div" / "run.json").find("\"exit_code\": 3") != std::string::npos);
}

TEST_CASE("cli: deflated steady solve finds the second root") {
  const fs::path d = scratch("deflate");
  REQUIRE(run_cli({"steady", "-o", d.string(), "--set", "problem.name=scalar_fold", "--set", "problem.parameters.a1=-1",
               "--set", "steady.guess=[2]", "--set", "steady.deflate=[[1]]"}) == 0);
  const Snapshot s = read_snapshot((d / "steady.bfks").string());
  CHECK(s.payload(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cli: trace then bif-locate reproduces the first Hopf point") {
  const fs::path d = scratch("pipeline");
  const std::string g = "problem.grid_points=201";
  REQUIRE(run_cli({"trace", "-o", (d / "tr").string(), "--set", g, "--set", "problem.parameters.L=0.3", "--set",
               "continuation.param_max=0.6", "--set", "continuation.h_max=0.05"}) == 0);
  REQUIRE(fs::exists(d / "tr" / "event_0.bfks"));
  REQUIRE(run_cli({"bif-locate", "-o", (d / "bl").string(), "--set", g, "--set",
               "input.snapshot=" + (d / "tr" / "event_0.bfks").string()}) == 0);
  const auto rows = table(d / "bl" / "bifpoints.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rfind("index,kind,L,omega,period", 0) == 0);
  const auto v = row_values(rows[1]);
  CHECK(v[1] == 2.0);  // hopf
  CHECK(std::abs(v[2] - 0.51302) / 0.51302 < 0.01);
  CHECK(std::abs(v[3] - 2.1395) / 2.1395 < 0.01);
  CHECK(v[10] == 1.0);  // supercritical

  // a 0-D snapshot handed to the 1-D problem
  CHECK(run_cli({"bif-locate", "-o", (d / "bad").string(), "--set", "problem.grid_points=51", "--set",
             "input.snapshot=" + (d / "tr" / "event_0.bfks").string()}) == 4);
}

TEST_CASE("cli: restart continues the branch in the stored direction") {
  const fs::path d = scratch("restart");
  const std::string g = "problem.grid_points=21";
  REQUIRE(run_cli({"trace", "-o", (d / "a").string(), "--set", g, "--set", "problem.parameters.L=0.3", "--set",
               "continuation.h0=-0.01", "--set", "continuation.max_points=4", "--set", "continuation.monitor=false"}) ==
          0);
  REQUIRE(run_cli({"trace", "-o", (d / "b").string(), "--set", g, "--set",
               "input.snapshot=" + (d / "a" / "branch_final.bfks").string(), "--set",
               "input.branch=" + (d / "a" / "branch.csv").string(), "--set", "continuation.max_points=4", "--set",
               "continuation.monitor=false"}) == 0);
  const auto a = table(d / "a" / "branch.csv"), b = table(d / "b" / "branch.csv");
  const double last_a = row_values(a.back())[1];
  const auto first_b = row_values(b[1]);
  CHECK(first_b[0] == row_values(a.back())[0] + 1);
  CHECK(first_b[1] < last_a);  // still decreasing L

  // a snapshot that does not match the branch's last row
  CHECK(run_cli({"trace", "-o", (d / "c").string(), "--set", g, "--set",
             "input.snapshot=" + (d / "a" / "branch_final.bfks").string(), "--set",
             "input.branch=" + (d / "b" / "branch.csv").string()}) == 4);
}

TEST_CASE("cli: hb pipeline is deterministic and snapshots round-trip through floquet") {
  const fs::path d = scratch("hb");
  const std::string g = "problem.grid_points=31";
  REQUIRE(run_cli({"bif-locate", "-o", (d / "bl").string(), "--set", g, "--set", "problem.parameters.L=0.5", "--set",
               "bifurcation.kind=hopf", "--set", "bifurcation.omega=2.14"}) == 0);
  const std::string bif = "input.snapshot=" + (d / "bl" / "bifpoint_0.bfks").string();
  for (const char* run : {"t1", "t2"}) {
    REQUIRE(run_cli({"hb-trace", "-o", (d / run).string(), "--set", g, "--set", bif, "--set", "hb.order=3", "--set",
                 "hb.offset=0.02", "--set", "hb.max_points=8", "--set", "hb.h_max=0.2"}) == 0);
  }
  CHECK(slurp(d / "t1" / "hb_branch.csv") == slurp(d / "t2" / "hb_branch.csv"));
  CHECK(slurp(d / "t1" / "orbit_final.bfks") == slurp(d / "t2" / "orbit_final.bfks"));
  const auto rows = table(d / "t1" / "hb_branch.csv");
  CHECK(rows[0] == "index,L,omega,period,norm_q1,norm_q2,norm_q3,iterations");
  CHECK(rows.size() == 9);

  REQUIRE(run_cli({"floquet", "-o", (d / "fl").string(), "--set", g, "--set",
               "input.snapshot=" + (d / "t1" / "orbit_final.bfks").string()}) == 0);
  CHECK(slurp(d / "fl" / "orbit.bfks") == slurp(d / "t1" / "orbit_final.bfks"));
  const auto fl = table(d / "fl" / "floquet.csv");
  int phase = 0;
  for (std::size_t i = 1; i < fl.size(); ++i) phase += row_values(fl[i])[4] == 1.0;
  CHECK(phase == 1);

  // hb on a snapshot of the wrong kind
  CHECK(run_cli({"hb-solve", "-o", (d / "bad").string(), "--set", g, "--set",
             "input.snapshot=" + (d / "fl" / "floquet_mode_0.bfks").string()}) == 4);
}

TEST_CASE("cli: bif-trace of the scalar cusp fold curve") {
  const fs::path d = scratch("cusp");
  const std::vector<std::string> base = {"--set", "problem.name=scalar_cusp", "--set", "problem.parameters.a2=-1"};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), base.begin(), base.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  // fold of q^3 - q + a1 near q = 1/sqrt(3), a1 = -2/(3 sqrt 3)... start from a nearby steady state
  REQUIRE(run_cli(with({"steady", "-o", (d / "st").string()},
                   {"--set", "problem.parameters.a1=-0.3", "--set", "steady.guess=[0.7]"})) == 0);
  REQUIRE(run_cli(with({"bif-locate", "-o", (d / "bl").string()},
                   {"--set", "problem.parameters.a1=-0.3", "--set", "bifurcation.kind=fold", "--set",
                    "input.snapshot=" + (d / "st" / "steady.bfks").string()})) == 0);
  REQUIRE(run_cli(with({"bif-trace", "-o", (d / "bt").string()},
                   {"--set", "input.snapshot=" + (d / "bl" / "bifpoint_0.bfks").string(), "--set",
                    "bifurcation.second=a2", "--set", "bifurcation.second_max=0.5", "--set",
                    "bifurcation.max_points=200", "--set", "bifurcation.h0=0.05"})) == 0);
  const auto rows = table(d / "bt" / "curve.csv");
  REQUIRE(rows.size() > 5);
  CHECK(rows[0] == "index,a1,a2,omega,period,g_abs,beta_re,beta_im,bautin,bogdanov_takens,cusp,fold_hopf");
  int cusps = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto v = row_values(rows[i]);
    CHECK(std::abs(4 * v[2] * v[2] * v[2] + 27 * v[1] * v[1]) < 1e-6 * (1 + std::abs(v[2] * v[2] * v[2])));
    cusps += v[10] == 1.0;
  }
  CHECK(cusps == 1);
}

TEST_CASE("cli: check reports derivative consistency") {
  const fs::path d = scratch("check");
  CHECK(run_cli({"check", "-o", d.string(), "--set", "problem.name=brusselator_0d"}) == 0);
  const auto rows = table(d / "check.csv");
  CHECK(rows.front() == "callback,max_relative_error");
  CHECK(rows.size() > 5);
}

TEST_CASE("cli: eigs writes spectrum and mode snapshots") {
  const fs::path d = scratch("eigs");
  REQUIRE(run_cli({"eigs", "-o", d.string(), "--set", "problem.name=brusselator_0d", "--set", "eigs.nev=2"}) == 0);
  const auto rows = table(d / "spectrum.csv");
  REQUIRE(rows.size() == 3);
  // B = 4.5 < 1 + A^2: both eigenvalues (B - 1 - A^2 +- sqrt(.)) / 2 have sigma = -0.25
  CHECK(row_values(rows[1])[1] == doctest::Approx(-0.25).epsilon(1e-10));
  const Snapshot m = read_snapshot((d / "mode_0.bfks").string());
  CHECK(m.kind == SnapshotKind::mode);
}
