"""Compiled kernel vs pure-Python fallback: the two backends must produce
bit-identical trajectories on every code path."""

import importlib

import numpy as np
import pytest

from platoon_lab import SpeedProfile, run_platoon
from platoon_lab import integrator, kernel
from platoon_lab.simulator import build_system

from conftest import make_scenario

compiled = pytest.importorskip("platoon_lab._kernel")
from platoon_lab import _kernel_py  # noqa: E402


def run_with(impl, scenario, plant="nonlinear", clamps=True, monkeypatch=None):
    monkeypatch.setattr(kernel, "run_closed_loop", impl.run_closed_loop)
    return run_platoon(scenario, plant=plant, clamps=clamps)


@pytest.mark.parametrize("delay", [0.0, 0.05])
@pytest.mark.parametrize("tail", ["virtual_follower", "one_sided"])
@pytest.mark.parametrize("plant", ["nonlinear", "linearized"])
def test_backends_bit_identical(monkeypatch, delay, tail, plant):
    profile = SpeedProfile.from_pairs([(0.0, 31.44), (1.0, 31.44), (2.0, 29.0),
                                       (3.0, 29.0)])
    scenario = make_scenario(followers=3, delay=delay, duration=3.0, offset=2.0,
                             profile=profile, last_truck_policy=tail)
    t_c = run_with(compiled, scenario, plant=plant, monkeypatch=monkeypatch)
    t_p = run_with(_kernel_py, scenario, plant=plant, monkeypatch=monkeypatch)
    assert t_c.status == t_p.status
    assert t_c.term_step == t_p.term_step
    for name in ("p", "v", "a", "u", "sste", "ssse"):
        a = getattr(t_c, name)
        b = getattr(t_p, name)
        assert np.array_equal(a, b), f"{name} differs between backends"


def test_backends_agree_on_collision(monkeypatch):
    """A destabilized platoon collides at the same step in both backends."""
    from platoon_lab import ControlGains
    wild = ControlGains(k_d1=5.0, k_d2=5.0, k_v=0.0, k_c=0.0)
    scenario = make_scenario(gains=wild, followers=3, delay=0.2, lag=0.2,
                             duration=120.0, offset=5.0)
    t_c = run_with(compiled, scenario, monkeypatch=monkeypatch)
    t_p = run_with(_kernel_py, scenario, monkeypatch=monkeypatch)
    assert t_c.status == "collision"
    assert t_p.status == "collision"
    assert t_c.term_step == t_p.term_step
    # the trace includes the offending step and stops there
    assert len(t_c.sste) == t_c.term_step + 1


def test_divergence_status():
    """Non-finite or runaway state flips the status to diverged."""
    scenario = make_scenario(followers=1, duration=1.0, offset=0.0)
    system = build_system(scenario, clamps=False)
    system.init_v = np.array([1e29])   # runaway magnitude trips the guard
    system.init_p = np.array([-50.0])
    trace = integrator.integrate(system, scenario)
    assert trace.status == "diverged"
    assert trace.term_step < scenario.n_steps


def test_backend_env_override(monkeypatch):
    monkeypatch.setenv("PLATOON_LAB_BACKEND", "python")
    mod = importlib.reload(kernel)
    try:
        assert mod.BACKEND == "python"
        assert mod.run_closed_loop is _kernel_py.run_closed_loop
    finally:
        monkeypatch.delenv("PLATOON_LAB_BACKEND")
        importlib.reload(kernel)
