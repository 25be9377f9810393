"""Exogenous control laws for the follower trucks.

Every law is affine in the observed gaps and speeds. Observations are the
neighbor states one dead time old; the virtual tail truck is the only
consumer of live states (it is a software construct, not a plant).
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import ControlGains, TimeGapPolicy


@dataclass(frozen=True)
class NeighborObservation:
    """Delayed view of a follower's neighborhood.

    ``follow_gap``/``follow_speed`` are None for the one-sided tail mode.
    """

    lead_gap: float
    lead_speed: float
    own_speed: float
    follow_gap: float | None = None
    follow_speed: float | None = None


def asymmetric_lbcm(obs: NeighborObservation, gains: ControlGains,
                    policy: TimeGapPolicy) -> float:
    """Bilateral law with the extra desired-time-gap term on the leading gap.

    u_c = k_d1 (d_l - d_f) + k_d2 (d_l - v T_g_des)
        + k_v [(v_l - v) - (v - v_f)] + k_c (v_des - v)

    so the leading gap carries weight k_d1 + k_d2 and the following gap k_d1.
    """
    if obs.follow_gap is None or obs.follow_speed is None:
        raise ValueError("bilateral law needs both neighbors; use the tail laws otherwise")
    d_des = obs.own_speed * policy.T_g_des
    return (gains.k_d1 * (obs.lead_gap - obs.follow_gap)
            + gains.k_d2 * (obs.lead_gap - d_des)
            + gains.k_v * ((obs.lead_speed - obs.own_speed)
                           - (obs.own_speed - obs.follow_speed))
            + gains.k_c * (policy.v_des - obs.own_speed))


def symmetric_lbcm(obs: NeighborObservation, gains: ControlGains,
                   policy: TimeGapPolicy) -> float:
    """Equal-weight baseline: the same law with k_d2 = 0."""
    return asymmetric_lbcm(obs, gains, policy)


def bilateral_control(obs: NeighborObservation, gains: ControlGains,
                      policy: TimeGapPolicy) -> float:
    """Dispatch on gains.model_kind (the symmetric model is k_d2 = 0)."""
    return asymmetric_lbcm(obs, gains, policy)


def virtual_follower_control(lead_gap: float, lead_speed: float, own_speed: float,
                             gains: ControlGains, policy: TimeGapPolicy) -> float:
    """Unidirectional law driving the virtual truck behind the last follower.

    u_c = k_d (d_l - v T_g_des) + k_v (v_l - v) + k_c (v_des - v), k_d = k_d1.
    The virtual truck is a pure double integrator with no lag, delay, or
    clamps, so this value is its acceleration directly.
    """
    d_des = own_speed * policy.T_g_des
    return (gains.k_d1 * (lead_gap - d_des)
            + gains.k_v * (lead_speed - own_speed)
            + gains.k_c * (policy.v_des - own_speed))


def one_sided_last_truck(obs: NeighborObservation, gains: ControlGains,
                         policy: TimeGapPolicy) -> float:
    """Tail law that simply drops the follower terms.

    u_c = k_d (d_l - v T_g_des) + k_v (v_l - v), k_d = k_d1. No desired-speed
    term: this mirrors the tail row of the platoon's gap-error dynamics.
    """
    d_des = obs.own_speed * policy.T_g_des
    return (gains.k_d1 * (obs.lead_gap - d_des)
            + gains.k_v * (obs.lead_speed - obs.own_speed))
