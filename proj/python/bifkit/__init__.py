"""Python bindings for the bifkit bifurcation-analysis library."""

from ._core import *  # noqa: F401,F403
from ._core import BifKind, StepControl, StopCriteria, MonitorSettings, __version__


def trace(problem, q, p, *, h0=0.01, h_max=0.1, param_min=None, param_max=None, max_points=100,
          monitor=False, nev=6, shift=0j):
    """Trace the steady branch through (q, p) in p.active with keyword settings."""
    from ._core import make_branch_point, trace_branch

    c = StepControl()
    c.h0, c.h_max = h0, h_max
    s = StopCriteria()
    s.max_points = max_points
    if param_min is not None:
        s.param_min = param_min
    if param_max is not None:
        s.param_max = param_max
    m = MonitorSettings()
    m.enabled, m.nev, m.shift = monitor, nev, shift
    return trace_branch(problem, make_branch_point(problem, q, p), c, s, m)


def main(argv=None):
    """Entry point mirroring the bifkit executable."""
    import sys

    from ._core import run_cli

    return run_cli(list(sys.argv[1:] if argv is None else argv))
