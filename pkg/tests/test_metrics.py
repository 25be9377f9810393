import math

import numpy as np
import pytest

from platoon_lab import SimulationTrace, run_platoon
from platoon_lab.metrics import (MinTgResult, TgGridPoint, fitness_components,
                                 min_achievable_tg, quasi_steady_max_sste,
                                 scenario_tg_runner, ssse, sste)

from conftest import make_scenario

LENGTH = 16.15


def synthetic_trace(time_gaps_rows, speeds_rows, tg_des=0.8, v_ref=31.44, h=0.1):
    """Build a trace whose measured time gaps and speeds are prescribed.

    time_gaps_rows: (n_steps, N) desired measured time gap per follower.
    speeds_rows: (n_steps, N+1) speeds including the leader column.
    """
    tg_rows = np.asarray(time_gaps_rows, dtype=float)
    v = np.asarray(speeds_rows, dtype=float)
    n_steps, n_follow = tg_rows.shape
    p = np.zeros((n_steps, n_follow + 1))
    for r in range(n_steps):
        for j in range(1, n_follow + 1):
            gap = tg_rows[r, j - 1] * max(v[r, j], 0.1)
            p[r, j] = p[r, j - 1] - gap - LENGTH
    dummy = np.zeros_like(v)
    return SimulationTrace(h=h, record_stride=1, status="completed",
                           term_step=n_steps - 1, p=p, v=v, a=dummy, u=dummy,
                           sste=np.zeros(n_steps), ssse=np.zeros(n_steps),
                           truck_length=LENGTH, summary={"tg_des": tg_des})


def test_sste_hand_cases():
    v = np.full((1, 6), 31.44)
    exact = synthetic_trace(np.full((1, 5), 0.8), v)
    assert sste(exact, 0) == 0.0

    one_off = synthetic_trace([[0.9, 0.8, 0.8, 0.8, 0.8]], v)
    assert sste(one_off, 0) == pytest.approx(0.01, rel=1e-12)

    all_off = synthetic_trace([[0.9] * 5], v)
    assert all_off and sste(all_off, 0) == pytest.approx(0.05, rel=1e-12)


def test_ssse_hand_cases():
    tg = np.full((1, 5), 0.8)
    equal = synthetic_trace(tg, np.full((1, 6), 31.44))
    assert ssse(equal, 0) == 0.0

    # first follower 2 m/s slow: appears in two consecutive differences
    v = np.full((1, 6), 31.44)
    v[0, 1] = 29.44
    assert ssse(synthetic_trace(tg, v), 0) == pytest.approx(8.0, rel=1e-12)

    # uniform cascade v_j = v_L - j*delta gives one delta^2 per difference
    delta = 0.5
    v = np.array([[31.44 - j * delta for j in range(6)]])
    assert ssse(synthetic_trace(tg, v), 0) == pytest.approx(5 * delta ** 2, rel=1e-12)


def test_fitness_components_hand_cases():
    tg = np.full((4, 5), 0.8)
    v = np.full((4, 6), 31.44)
    perfect = synthetic_trace(tg, v)
    assert fitness_components(perfect, 0.8) == (0.0, 0.0)

    # constant SSSE of 8 (first follower 2 m/s slow) with N = 5
    v_off = v.copy()
    v_off[:, 1] = 29.44
    y1, _ = fitness_components(synthetic_trace(tg, v_off), 0.8)
    assert y1 == pytest.approx(math.sqrt(8.0 / 5.0), rel=1e-12)

    # single follower with +0.1 s constant error: literal aggregate is
    # 0.1/sqrt(5) per step
    tg_off = tg.copy()
    tg_off[:, 2] = 0.9
    _, y2 = fitness_components(synthetic_trace(tg_off, v), 0.8)
    assert y2 == pytest.approx(0.1 / math.sqrt(5.0), rel=1e-9)

    # two followers off differentiate the literal scheme from a true RMS
    tg_two = tg.copy()
    tg_two[:, 0] = 0.9
    tg_two[:, 1] = 1.1
    _, lit = fitness_components(synthetic_trace(tg_two, v), 0.8, scheme="literal")
    _, rms = fitness_components(synthetic_trace(tg_two, v), 0.8, scheme="rmse")
    assert lit == pytest.approx(0.4 / math.sqrt(5.0), rel=1e-9)
    assert rms == pytest.approx(math.sqrt(0.10 / 5.0), rel=1e-9)
    with pytest.raises(ValueError):
        fitness_components(synthetic_trace(tg, v), 0.8, scheme="median")


def test_kernel_metrics_match_module_recomputation():
    """Dual route: the in-kernel SSTE/SSSE accumulators against the pure
    recomputation from recorded states."""
    scenario = make_scenario(followers=3, duration=1.5, offset=3.0)
    trace = run_platoon(scenario)
    for k in (0, 1, 57, 500, 1499):
        assert trace.sste[k] == pytest.approx(sste(trace, k), rel=1e-12, abs=1e-15)
        assert trace.ssse[k] == pytest.approx(ssse(trace, k), rel=1e-12, abs=1e-15)
    y1, y2 = fitness_components(trace, scenario.policy.T_g_des)
    assert trace.summary["y1_mean"] == pytest.approx(y1, rel=1e-9, abs=1e-12)
    assert trace.summary["y2_mean"] == pytest.approx(y2, rel=1e-9, abs=1e-12)


def test_quasi_steady_windowing():
    n = 1000
    h = 0.1  # 100 s horizon
    series = np.full(n, 1e-4)
    series[300:320] = 5.0      # transient right after the event at t = 30
    series[800:] = 2e-3        # persistent elevation later
    trace = SimulationTrace(h=h, record_stride=1, status="completed",
                            term_step=n - 1, p=np.zeros((1, 2)), v=np.zeros((1, 2)),
                            a=np.zeros((1, 2)), u=np.zeros((1, 2)), sste=series,
                            ssse=np.zeros(n), truck_length=LENGTH)
    qs = quasi_steady_max_sste(trace, event_times=[30.0], warmup_s=5.0, settle_s=40.0)
    assert qs == pytest.approx(2e-3)
    # without the settling window the transient dominates
    qs_raw = quasi_steady_max_sste(trace, event_times=[], warmup_s=5.0, settle_s=0.0)
    assert qs_raw == pytest.approx(5.0)


def test_min_achievable_tg_surrogate():
    """Threshold + plateau logic on a fabricated stability landscape."""
    def runner(tg):
        if tg < 1.0:
            return TgGridPoint(tg, "collision", float("inf"))
        if tg < 1.3:
            return TgGridPoint(tg, "completed", 0.5)   # rings above threshold
        return TgGridPoint(tg, "completed", 1e-4)
    result = min_achievable_tg(runner, grid=[round(0.5 + 0.1 * i, 1) for i in range(26)])
    assert result.min_tg == 1.3
    assert result.achievable
    statuses = {p.tg_des: p.status for p in result.grid}
    assert statuses[0.9] == "collision"

    hopeless = min_achievable_tg(lambda tg: TgGridPoint(tg, "completed", 1.0),
                                 grid=[0.5, 0.6, 0.7])
    assert hopeless.min_tg is None
    assert not hopeless.achievable


def test_min_achievable_tg_needs_two_lookahead_points():
    """A candidate at the end of the grid cannot confirm its plateau."""
    def runner(tg):
        return TgGridPoint(tg, "completed", 1e-5)
    result = min_achievable_tg(runner, grid=[2.8, 2.9, 3.0])
    assert result.min_tg == 2.8
    result_short = min_achievable_tg(runner, grid=[2.9, 3.0])
    assert result_short.min_tg is None


def test_scenario_tg_runner_rebuilds_policy():
    scenario = make_scenario(duration=10.0, offset=0.0)
    calls = []

    def fake_run(sc):
        calls.append(sc.policy.T_g_des)
        return run_platoon(sc, record_stride=1000)
    runner = scenario_tg_runner(scenario, runner=fake_run)
    point = runner(1.7)
    assert isinstance(point, TgGridPoint)
    assert calls == [1.7]
    assert point.status == "completed"
