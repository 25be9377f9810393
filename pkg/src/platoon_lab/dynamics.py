"""Third-order nonlinear longitudinal truck plant.

The plant is::

    dp/dt = v
    dv/dt = a - R(v)/M
    da/dt = (u_delayed - a) / T_e

with resistive force R(v) = aerodynamic drag + rolling resistance. A
feedback-linearizing input cancels the resistive terms so the closed loop
seen by the exogenous command u_c reduces to  d²v/dt² = u_c(t - delay)/T_e.
Acceleration limits are a plant property: the realized acceleration is
clamped after the lag dynamics, not the command.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import (MAX_DECELERATION, ROLLING_GRAVITY_FACTOR, TimeGapPolicy,
                     TruckParams, TruckState)


def altitude_coefficient(altitude: float) -> float:
    """Air-density correction 1 - 8.5e-5 * altitude (altitude in m)."""
    if altitude < 0:
        raise ValueError(f"altitude must be >= 0 (got {altitude})")
    return 1.0 - 8.5e-5 * altitude


@dataclass(frozen=True)
class LinearizedCoeffs:
    """Per-mass resistance coefficients: R(v)/M = C_1 v² + C_2 v + C_3."""

    C_1: float  # 1/m, aerodynamic
    C_2: float  # 1/s, speed-proportional rolling
    C_3: float  # m/s², constant rolling

    @classmethod
    def from_params(cls, params: TruckParams) -> "LinearizedCoeffs":
        ch = altitude_coefficient(params.altitude)
        c1 = params.air_const * params.drag_coeff * ch * params.frontal_area / params.mass
        c2 = ROLLING_GRAVITY_FACTOR * params.rolling_coeff * params.rolling_c2
        c3 = ROLLING_GRAVITY_FACTOR * params.rolling_coeff * params.rolling_c3
        return cls(C_1=c1, C_2=c2, C_3=c3)

    def specific_resistance(self, v: float) -> float:
        """R(v)/M at speed v."""
        return self.C_1 * v * v + self.C_2 * v + self.C_3


@dataclass(frozen=True)
class ResistanceBreakdown:
    aero: float     # N
    rolling: float  # N

    @property
    def total(self) -> float:
        return self.aero + self.rolling


def resistance(params: TruckParams, v: float) -> ResistanceBreakdown:
    """Aerodynamic and rolling resistive forces at speed v >= 0."""
    coeffs = LinearizedCoeffs.from_params(params)
    aero = params.mass * coeffs.C_1 * v * v
    rolling = params.mass * (coeffs.C_2 * v + coeffs.C_3)
    return ResistanceBreakdown(aero=aero, rolling=rolling)


def plant_derivatives(state: TruckState, u_delayed: float, params: TruckParams,
                      lag: float) -> tuple[float, float, float]:
    """Time derivatives (dp/dt, dv/dt, da/dt) of the nonlinear plant.

    ``u_delayed`` is the plant input sampled one dead time ago.
    """
    coeffs = LinearizedCoeffs.from_params(params)
    dp = state.v
    dv = state.a - coeffs.specific_resistance(state.v)
    da = (u_delayed - state.a) / lag
    return dp, dv, da


def feedback_linearize(state: TruckState, vdot: float, u_c: float,
                       params: TruckParams, lag: float) -> float:
    """Plant input that cancels the resistive nonlinearity.

    With f(v, v̇) = -(1/T_e)(v̇ + C_1 v² + C_2 v + C_3) - 2 C_1 v v̇ - C_2 v̇
    and g = 1/T_e, returns u = -f/g + u_c, so the composed loop satisfies
    d²v/dt² = u_c(t - delay)/T_e regardless of mass and resistance.
    """
    coeffs = LinearizedCoeffs.from_params(params)
    f = (-(vdot + coeffs.specific_resistance(state.v)) / lag
         - 2.0 * coeffs.C_1 * state.v * vdot - coeffs.C_2 * vdot)
    g = 1.0 / lag
    return -f / g + u_c


def resistance_compensated_input(state: TruckState, u_c: float, params: TruckParams,
                                 lag: float) -> float:
    """Plant input that cancels only the resistive terms.

    Unlike ``feedback_linearize`` this keeps the actuator pole: the closed
    loop satisfies d(v̇)/dt = (u_c(t - delay) - v̇)/T_e, a damped lag on the
    net acceleration. This is the law the simulator runs; the full
    linearization above cancels the lag damping as well, which leaves the
    jerk dynamics of a platoon without any stabilizing term.
    """
    coeffs = LinearizedCoeffs.from_params(params)
    specific = coeffs.specific_resistance(state.v)
    vdot = state.a - specific
    return u_c + specific + lag * (2.0 * coeffs.C_1 * state.v + coeffs.C_2) * vdot


def max_acceleration(v: float) -> float:
    """Speed-dependent acceleration ceiling for a 200 lb/hp heavy truck.

    Bands are left-closed in m/s; an exact band boundary takes the
    higher-speed (smaller) limit.
    """
    if v < 4.4:
        return 0.55
    elif v < 8.9:
        return 0.49
    elif v < 13.3:
        return 0.40
    elif v < 17.8:
        return 0.24
    elif v < 22.2:
        return 0.15
    return 0.12


def clamp_acceleration(a: float, v: float, policy: TimeGapPolicy) -> float:
    """Clamp a realized acceleration into the truck's physical envelope.

    The result lies in [-MAX_DECELERATION, max_acceleration(v)], is never
    positive at or above ``policy.v_max``, and never negative at standstill.
    """
    lo = -MAX_DECELERATION
    hi = max_acceleration(v)
    if v >= policy.v_max and hi > 0.0:
        hi = 0.0
    if v <= 0.0 and lo < 0.0:
        lo = 0.0
    if a < lo:
        return lo
    if a > hi:
        return hi
    return a
