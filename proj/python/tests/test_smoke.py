import math

import numpy as np
import pytest

import bifkit


def test_registry_and_parameters():
    assert "brusselator_1d" in bifkit.registered_problems()
    pb = bifkit.make_problem("brusselator_0d")
    p = pb.default_parameters()
    assert p.names == ["A", "B"]
    p["B"] = 4.0
    assert p["B"] == 4.0
    assert p.as_dict()["A"] == 2.0


def test_newton_and_deflation():
    pb = bifkit.make_problem("scalar_fold")
    p = pb.default_parameters()
    p["a1"] = -1.0
    plain = bifkit.newton_solve(pb, np.array([2.0]), p)
    assert plain.converged and plain.q[0] == pytest.approx(1.0)
    d = bifkit.DeflationSettings()
    d.known_solutions = [np.array([1.0])]
    r = bifkit.deflated_newton_solve(pb, np.array([2.0]), p, bifkit.NewtonSettings(), d)
    assert r.converged and r.q[0] == pytest.approx(-1.0)


def test_errors_carry_kind():
    with pytest.raises(bifkit.BifkitError) as e:
        bifkit.make_problem("nosuch")
    assert e.value.args[1] == "invalid-configuration"


def test_hopf_trace_and_orbit():
    pb = bifkit.make_problem("brusselator_1d", {"grid_points": 31})
    p = pb.default_parameters()
    p["L"] = 0.3
    br = bifkit.trace(pb, bifkit.initial_state(pb, p), p, h0=0.05, h_max=0.05, param_max=0.7,
                      max_points=50, monitor=True)
    hopf = [b for b in bifkit.locate_branch_events(pb, br) if b.kind == bifkit.BifKind.hopf]
    assert len(hopf) == 1
    h = hopf[0]
    assert h.alpha["L"] == pytest.approx(0.513, rel=0.02)
    h.normal_form = bifkit.normal_form(pb, h)
    assert h.normal_form.supercritical

    dalpha = np.zeros(len(h.alpha))
    dalpha[h.alpha.names.index("L")] = 0.01
    wn = bifkit.weakly_nonlinear_predict(h, dalpha, 3)
    p2 = h.alpha.copy()
    p2["L"] = h.alpha["L"] + 0.01
    orbit = bifkit.hb_solve(pb, wn.orbit, p2, order=3)
    assert orbit.converged
    assert orbit.state.period == pytest.approx(2 * math.pi / orbit.state.omega)
    pairs = bifkit.floquet(pb, orbit.state, p2, 0j, 6)
    assert sum(fp.phase_mode for fp in pairs) == 1


def test_eigs_sorted_by_distance():
    pb = bifkit.make_problem("brusselator_0d")
    p = pb.default_parameters()
    p["B"] = 5.0
    pairs = bifkit.eigs(pb, bifkit.initial_state(pb, p), p, 1.9j, 2)
    assert abs(pairs[0].eigenvalue - 2j) < 1e-8
    assert abs(pairs[1].eigenvalue + 2j) < 1e-8
    # a shift exactly on an eigenvalue is rejected
    with pytest.raises(bifkit.BifkitError):
        bifkit.eigs(pb, bifkit.initial_state(pb, p), p, 2j, 2)


def test_snapshot_round_trip(tmp_path):
    pb = bifkit.make_problem("brusselator_0d")
    p = pb.default_parameters()
    s = bifkit.steady_snapshot(pb, bifkit.initial_state(pb, p), p)
    path = str(tmp_path / "s.bfks")
    bifkit.write_snapshot(path, s)
    back = bifkit.read_snapshot(path)
    assert back.kind == bifkit.SnapshotKind.steady
    assert back.encode() == s.encode()
    assert bifkit.decode_snapshot(back.encode()).problem == "brusselator_0d"
    with pytest.raises(bifkit.BifkitError):
        bifkit.decode_snapshot(b"garbage")


def test_cli_entry(tmp_path):
    rc = bifkit.run_cli(["steady", "-o", str(tmp_path), "--set", "problem.name=brusselator_0d"])
    assert rc == 0
    assert (tmp_path / "steady.csv").exists()
    assert bifkit.run_cli(["frobnicate"]) == 2
