"""Scenario assembly: leader speed profiles, perturbations, and platoon runs.

The leader is kinematic (profile-driven); followers run the bilateral law
through feedback linearization, the lag/delay actuator, and the acceleration
envelope. The last follower is trailed either by a virtual truck running the
unidirectional law (default) or by nothing (one-sided tail law).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import (MAX_DECELERATION, TIME_GAP_SPEED_FLOOR, PlatoonScenario,
                     SimulationTrace, validate_scenario)
from .dynamics import LinearizedCoeffs, max_acceleration
from .integrator import PlatoonSystem, integrate
from .profiles import SpeedProfile

# Cruise speeds of the evaluation schedule, m/s.
CRUISE_SPEED = 31.44
SLOW_SPEED_1 = 19.69
SLOW_SPEED_2 = 24.15


@dataclass(frozen=True)
class ScheduleSegment:
    start: float
    end: float
    target: float  # m/s; reached by a dynamics-limited ramp, then held


@dataclass(frozen=True)
class LeaderSchedule:
    """Contiguous segments covering [0, duration], each with a target speed."""

    segments: tuple[ScheduleSegment, ...]

    def __post_init__(self):
        segs = self.segments
        if not segs:
            raise ValueError("schedule needs at least one segment")
        if segs[0].start != 0.0:
            raise ValueError("schedule must start at t=0")
        for prev, cur in zip(segs, segs[1:]):
            if cur.start != prev.end:
                raise ValueError(f"segments must be contiguous "
                                 f"(gap between {prev.end} and {cur.start})")
        for seg in segs:
            if seg.end <= seg.start:
                raise ValueError(f"segment [{seg.start}, {seg.end}] has no width")

    @property
    def duration(self) -> float:
        return self.segments[-1].end


def default_evaluation_schedule() -> LeaderSchedule:
    """Three cruise states with two hard slowdowns and recoveries over 900 s."""
    s = ScheduleSegment
    return LeaderSchedule((
        s(0.0, 149.0, CRUISE_SPEED),
        s(149.0, 158.0, SLOW_SPEED_1),
        s(158.0, 240.0, SLOW_SPEED_1),
        s(240.0, 359.0, CRUISE_SPEED),
        s(359.0, 562.0, CRUISE_SPEED),
        s(562.0, 569.0, SLOW_SPEED_2),
        s(569.0, 634.0, SLOW_SPEED_2),
        s(634.0, 712.0, CRUISE_SPEED),
        s(712.0, 900.0, CRUISE_SPEED),
    ))


_ACCEL_BAND_EDGES = (4.4, 8.9, 13.3, 17.8, 22.2)


def generate_leader_profile(schedule: LeaderSchedule,
                            max_decel: float = MAX_DECELERATION) -> SpeedProfile:
    """Piecewise-linear profile realizing the schedule.

    Upward transitions ramp at the speed-dependent acceleration ceiling
    (knots at every band edge), downward ones at ``max_decel``; the target is
    then held. Raises if a target cannot be reached within its segment.
    """
    # the leader starts at the first segment's target speed
    speed = schedule.segments[0].target
    knots_t = [0.0]
    knots_v = [speed]

    for seg in schedule.segments:
        t = max(knots_t[-1], seg.start)
        if seg.target > speed:
            while speed < seg.target:
                rate = max_acceleration(speed)
                band_top = next((b for b in _ACCEL_BAND_EDGES if b > speed), None)
                v_next = seg.target if band_top is None else min(seg.target, band_top)
                t = t + (v_next - speed) / rate
                speed = v_next
                knots_t.append(t)
                knots_v.append(speed)
        elif seg.target < speed:
            t = t + (speed - seg.target) / max_decel
            speed = seg.target
            knots_t.append(t)
            knots_v.append(speed)
        if t > seg.end:
            raise ValueError(f"target {seg.target} m/s unreachable within segment "
                             f"[{seg.start}, {seg.end}]")
        if seg.end > knots_t[-1]:
            knots_t.append(seg.end)
            knots_v.append(speed)
    return SpeedProfile(np.array(knots_t), np.array(knots_v))


def gain_design_profile() -> SpeedProfile:
    """Trapezoidal cruise/slowdown/recovery profile used only for gain tuning.

    Constant segments at the evaluation speed extremes joined by single
    linear ramps; every slope stays inside the acceleration envelope.
    Breakpoints: hold 31.44 to 30 s, ramp down to 19.69 by 40 s, hold to
    70 s, ramp up to 31.44 by 180 s, hold to 220 s.
    """
    t = np.array([0.0, 30.0, 40.0, 70.0, 180.0, 220.0])
    v = np.array([CRUISE_SPEED, CRUISE_SPEED, SLOW_SPEED_1, SLOW_SPEED_1,
                  CRUISE_SPEED, CRUISE_SPEED])
    return SpeedProfile(t, v)


@dataclass(frozen=True)
class PerturbationSpec:
    """Triangular speed pulses superimposed on a leader profile.

    Each pulse ramps linearly from zero to ``magnitude`` at the midpoint of
    ``ramp_duration`` and back to zero.
    """

    onsets: tuple[float, ...]
    magnitudes: tuple[float, ...]  # m/s, signed
    ramp_durations: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.onsets) == len(self.magnitudes) == len(self.ramp_durations)):
            raise ValueError("onsets, magnitudes, ramp_durations must have equal length")
        if any(w <= 0 for w in self.ramp_durations):
            raise ValueError("ramp durations must be > 0")

    def delta(self, t: float) -> float:
        total = 0.0
        for t0, mag, width in zip(self.onsets, self.magnitudes, self.ramp_durations):
            if t0 <= t <= t0 + width:
                total += mag * (1.0 - abs(2.0 * (t - t0) / width - 1.0))
        return total

    def knot_times(self) -> list[float]:
        ts = []
        for t0, width in zip(self.onsets, self.ramp_durations):
            ts += [t0, t0 + 0.5 * width, t0 + width]
        return ts


def apply_perturbation(profile: SpeedProfile, spec: PerturbationSpec,
                       v_max: float) -> SpeedProfile:
    """Superimpose the pulses on the profile, clamped into [0, v_max]."""
    if not spec.onsets:
        return profile
    return profile.offset_by(spec.knot_times(), spec.delta, 0.0, v_max)


def initial_follower_states(scenario: PlatoonScenario):
    """Initial (p, v, a) arrays: leader at p=0, followers at desired gap plus
    the start offset, everyone cruising at the leader's initial speed."""
    n = scenario.follower_count
    v0 = float(scenario.leader_profile.speed_at(0.0))
    spacing = scenario.truck_params.length + v0 * scenario.policy.T_g_des \
        + scenario.initial_gap_offset
    p = -spacing * np.arange(1, n + 1, dtype=float)
    v = np.full(n, v0)
    coeffs = LinearizedCoeffs.from_params(scenario.truck_params)
    a = np.full(n, coeffs.specific_resistance(v0))  # cruise-holding acceleration
    return p, v, a


def build_system(scenario: PlatoonScenario, *, plant: str = "nonlinear",
                 clamps: bool = True) -> PlatoonSystem:
    """Assemble the numeric closed-loop bundle for the integrator.

    ``plant="linearized"`` swaps the nonlinear plant + linearizing input for
    the equivalent triple-integrator closed loop (cross-check mode; its third
    state is dv/dt rather than the actuator output).
    """
    if plant not in ("nonlinear", "linearized"):
        raise ValueError(f"plant must be 'nonlinear' or 'linearized' (got {plant!r})")
    n_steps = scenario.n_steps
    h = scenario.step
    profile = scenario.leader_profile
    t_grid = np.arange(n_steps + 1) * h
    leader_v = profile.speed_at(t_grid)
    leader_p = profile.displacement_at(t_grid)   # leader starts at p = 0

    d_steps = scenario.powertrain.delay_steps(h)
    if d_steps == 0:
        t_half = t_grid[:-1] + 0.5 * h
        leader_v_half = profile.speed_at(t_half)
        leader_p_half = profile.displacement_at(t_half)
    else:
        leader_v_half = np.zeros(0)
        leader_p_half = np.zeros(0)

    p0, v0, a0 = initial_follower_states(scenario)
    if plant == "linearized":
        a0 = np.zeros_like(a0)  # third state is dv/dt; cruise means zero

    v_init = float(leader_v[0])
    virt_p0 = float(p0[-1]) - (scenario.truck_params.length
                               + v_init * scenario.policy.T_g_des)
    coeffs = LinearizedCoeffs.from_params(scenario.truck_params)
    return PlatoonSystem(
        leader_p=leader_p, leader_v=leader_v,
        leader_p_half=leader_p_half, leader_v_half=leader_v_half,
        init_p=p0, init_v=v0, init_a=a0,
        virt_p0=virt_p0, virt_v0=v_init,
        c1=coeffs.C_1, c2=coeffs.C_2, c3=coeffs.C_3,
        lag=scenario.powertrain.lag,
        truck_length=scenario.truck_params.length,
        delay_steps=d_steps,
        kd1=scenario.gains.k_d1, kd2=scenario.gains.k_d2,
        kv=scenario.gains.k_v, kc=scenario.gains.k_c,
        tg_des=scenario.policy.T_g_des, v_des=scenario.policy.v_des,
        v_max=scenario.policy.v_max,
        last_truck_mode=0 if scenario.last_truck_policy == "virtual_follower" else 1,
        plant_mode=0 if plant == "nonlinear" else 1,
        use_clamps=clamps,
        decel_limit=MAX_DECELERATION,
        tg_speed_floor=TIME_GAP_SPEED_FLOOR,
    )


def run_platoon(scenario: PlatoonScenario, *, plant: str = "nonlinear",
                clamps: bool = True, record_stride: int = 1,
                warmup_s: float = 50.0) -> SimulationTrace:
    """Validate, assemble, and integrate one scenario."""
    validate_scenario(scenario)
    system = build_system(scenario, plant=plant, clamps=clamps)
    return integrate(system, scenario, record_stride=record_stride,
                     warmup_s=warmup_s)
