"""Fixed-step integration of the coupled platoon delay system.

Delays must be integer multiples of the step, so every delayed lookup hits a
stored grid sample exactly. Within one RK4 step the delayed command is
evaluated at both step endpoints (both are past grid samples once the delay
is at least one step) and averaged for the midpoint stages; with zero delay
the command couples live through the stage states, which reduces the scheme
to classical RK4 on an ODE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernel
from .domain import PlatoonScenario, SimulationTrace

_STATUS_NAMES = {0: "completed", 1: "collision", 2: "diverged"}


class HistoryBuffer:
    """Ring of per-truck (p, v, a) samples on the step grid.

    Before t = 0 every truck is extrapolated as a steady cruise at its
    initial speed: p(t) = p0 + v0 t, v = v0, a = 0.
    """

    def __init__(self, n_trucks: int, step: float, depth: int,
                 initial_p, initial_v):
        if depth < 1:
            raise ValueError(f"depth must be >= 1 (got {depth})")
        self.n_trucks = n_trucks
        self.step = step
        self.depth = depth
        self._p0 = np.asarray(initial_p, dtype=float).copy()
        self._v0 = np.asarray(initial_v, dtype=float).copy()
        self._ring = np.zeros((depth, n_trucks, 3))
        self._newest = -1

    def push(self, step_index: int, p, v, a) -> None:
        if step_index != self._newest + 1:
            raise ValueError(f"samples must be pushed in order (expected "
                             f"{self._newest + 1}, got {step_index})")
        row = step_index % self.depth
        self._ring[row, :, 0] = p
        self._ring[row, :, 1] = v
        self._ring[row, :, 2] = a
        self._newest = step_index

    def sample_delayed(self, truck: int, t_minus_delta: float):
        """Exact stored sample at a grid time, or the pre-history cruise.

        Raises LookupError for grid times older than the retained depth.
        """
        idx = round(t_minus_delta / self.step)
        if abs(t_minus_delta - idx * self.step) > 1e-9 * max(1.0, abs(t_minus_delta)):
            raise ValueError(f"t={t_minus_delta} is not on the step grid (h={self.step})")
        if idx < 0:
            t = idx * self.step
            return (self._p0[truck] + self._v0[truck] * t, self._v0[truck], 0.0)
        if idx > self._newest or idx <= self._newest - self.depth:
            raise LookupError(f"step {idx} outside retained history "
                              f"({self._newest - self.depth + 1}..{self._newest})")
        row = self._ring[idx % self.depth, truck]
        return (row[0], row[1], row[2])


def rk4_step(deriv, t: float, y: np.ndarray, h: float, buffer=None) -> np.ndarray:
    """One classical Runge-Kutta step of y' = deriv(t, y[, buffer])."""
    if buffer is None:
        f = deriv
    else:
        def f(ts, ys):
            return deriv(ts, ys, buffer)
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(f(t, y))
    k2 = np.asarray(f(t + 0.5 * h, y + (0.5 * h) * k1))
    k3 = np.asarray(f(t + 0.5 * h, y + (0.5 * h) * k2))
    k4 = np.asarray(f(t + h, y + h * k3))
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class PlatoonSystem:
    """Numeric closed-loop bundle consumed by the integration kernel.

    Built by ``simulator.build_system``; everything is already on the step
    grid (leader positions/speeds, grid-multiple delay).
    """

    leader_p: np.ndarray
    leader_v: np.ndarray
    leader_v_half: np.ndarray       # leader speed at t_k + h/2, used when delay = 0
    leader_p_half: np.ndarray
    init_p: np.ndarray
    init_v: np.ndarray
    init_a: np.ndarray
    virt_p0: float
    virt_v0: float
    c1: float
    c2: float
    c3: float
    lag: float
    truck_length: float
    delay_steps: int
    kd1: float
    kd2: float
    kv: float
    kc: float
    tg_des: float
    v_des: float
    v_max: float
    last_truck_mode: int            # 0 virtual follower, 1 one-sided
    plant_mode: int                 # 0 nonlinear, 1 linearized cross-check
    use_clamps: bool
    decel_limit: float
    tg_speed_floor: float


def integrate(system: PlatoonSystem, scenario: PlatoonScenario, *,
              record_stride: int = 1, warmup_s: float = 50.0) -> SimulationTrace:
    """Run the closed loop over the scenario horizon and assemble the trace.

    Terminates early with status ``collision`` when any inter-truck gap
    drops to zero, or ``diverged`` on non-finite state.
    """
    n = scenario.follower_count
    n_steps = scenario.n_steps
    h = scenario.step
    stride = max(1, int(record_stride))
    n_rec = n_steps // stride + 1
    warmup_steps = round(warmup_s / h)

    rec_p = np.zeros((n_rec, n + 1))
    rec_v = np.zeros((n_rec, n + 1))
    rec_a = np.zeros((n_rec, n + 1))
    rec_u = np.zeros((n_rec, n + 1))
    rec_virt = np.zeros((n_rec, 2))
    sste = np.zeros(n_steps + 1)
    ssse = np.zeros(n_steps + 1)
    acc = np.zeros(8)

    depth = system.delay_steps + 1
    hist_p = np.zeros((depth, n + 2))
    hist_v = np.zeros((depth, n + 2))
    scratch = np.zeros((18, n))
    snap = np.zeros((4, n + 2))

    status, term_step = kernel.run_closed_loop(
        system.leader_p, system.leader_v, system.leader_p_half, system.leader_v_half,
        system.init_p.copy(), system.init_v.copy(), system.init_a.copy(),
        system.virt_p0, system.virt_v0,
        h, n_steps, system.delay_steps,
        system.c1, system.c2, system.c3, system.lag, system.truck_length,
        system.kd1, system.kd2, system.kv, system.kc,
        system.tg_des, system.v_des, system.v_max,
        system.last_truck_mode, system.plant_mode,
        1 if system.use_clamps else 0, system.decel_limit, system.tg_speed_floor,
        stride, warmup_steps,
        rec_p, rec_v, rec_a, rec_u, rec_virt, sste, ssse, acc,
        hist_p, hist_v, scratch, snap,
    )

    n_rec_valid = term_step // stride + 1
    samples = term_step + 1
    # leader acceleration from the profile's speed samples (centered difference)
    leader_a_full = np.gradient(system.leader_v[:term_step + 1], h) if term_step > 0 \
        else np.zeros(1)
    rec_idx = np.arange(n_rec_valid) * stride
    rec_a[:n_rec_valid, 0] = leader_a_full[rec_idx]

    summary = {
        "status": _STATUS_NAMES[status],
        "tg_des": system.tg_des,
        "y1_mean": acc[0] / samples,
        "y2_mean": acc[1] / samples,
        "y2_rmse_mean": acc[2] / samples,
        "max_sste": acc[3],
        "max_sste_post_warmup": acc[4],
        "max_ssse": acc[5],
        "warmup_s": warmup_s,
        "backend": kernel.BACKEND,
    }
    return SimulationTrace(
        h=h,
        record_stride=stride,
        status=_STATUS_NAMES[status],
        term_step=term_step,
        p=rec_p[:n_rec_valid],
        v=rec_v[:n_rec_valid],
        a=rec_a[:n_rec_valid],
        u=rec_u[:n_rec_valid],
        sste=sste[:samples],
        ssse=ssse[:samples],
        truck_length=system.truck_length,
        virt_p=rec_virt[:n_rec_valid, 0] if system.last_truck_mode == 0 else None,
        virt_v=rec_virt[:n_rec_valid, 1] if system.last_truck_mode == 0 else None,
        summary=summary,
    )
