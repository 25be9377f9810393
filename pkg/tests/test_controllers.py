import numpy as np
import pytest

from platoon_lab import ControlGains, TimeGapPolicy
from platoon_lab.controllers import (NeighborObservation, asymmetric_lbcm,
                                     one_sided_last_truck, symmetric_lbcm,
                                     virtual_follower_control)

POLICY = TimeGapPolicy(T_g_des=0.8, v_des=31.44, v_max=33.528)
ASYM = ControlGains(k_d1=1.9589, k_d2=1.9589, k_v=0.52, k_c=0.04)
SYM = ControlGains(k_d1=0.8322, k_d2=0.0, k_v=1.6170, k_c=9.927e-4,
                   model_kind="symmetric")


def equilibrium_obs(v=31.44, tg=0.8):
    gap = v * tg
    return NeighborObservation(lead_gap=gap, lead_speed=v, own_speed=v,
                               follow_gap=gap, follow_speed=v)


def test_asymmetric_full_equilibrium_is_zero():
    assert asymmetric_lbcm(equilibrium_obs(), ASYM, POLICY) == 0.0


def test_asymmetric_reference_value():
    obs = NeighborObservation(lead_gap=30.0, lead_speed=31.44, own_speed=31.44,
                              follow_gap=25.0, follow_speed=31.44)
    expected = 1.9589 * (30.0 - 25.0) + 1.9589 * (30.0 - 31.44 * 0.8)
    u = asymmetric_lbcm(obs, ASYM, POLICY)
    assert u == pytest.approx(expected, rel=1e-12)
    assert u == pytest.approx(19.29, abs=5e-3)


def test_asymmetric_gap_weights():
    """Lead gap carries k_d1 + k_d2; follow gap carries -k_d1."""
    base = equilibrium_obs()
    bumped_lead = NeighborObservation(base.lead_gap + 1.0, base.lead_speed,
                                      base.own_speed, base.follow_gap,
                                      base.follow_speed)
    bumped_follow = NeighborObservation(base.lead_gap, base.lead_speed,
                                        base.own_speed, base.follow_gap + 1.0,
                                        base.follow_speed)
    u0 = asymmetric_lbcm(base, ASYM, POLICY)
    assert asymmetric_lbcm(bumped_lead, ASYM, POLICY) - u0 == pytest.approx(
        ASYM.k_d1 + ASYM.k_d2, rel=1e-12)
    assert asymmetric_lbcm(bumped_follow, ASYM, POLICY) - u0 == pytest.approx(
        -ASYM.k_d1, rel=1e-12)


def test_symmetric_midpoint_equilibrium_and_reference():
    obs = NeighborObservation(lead_gap=27.0, lead_speed=31.44, own_speed=31.44,
                              follow_gap=27.0, follow_speed=31.44)
    assert symmetric_lbcm(obs, SYM, POLICY) == 0.0
    obs2 = NeighborObservation(lead_gap=30.0, lead_speed=31.44, own_speed=31.44,
                               follow_gap=25.0, follow_speed=31.44)
    assert symmetric_lbcm(obs2, SYM, POLICY) == pytest.approx(0.8322 * 5.0, rel=1e-12)


def test_symmetric_is_independent_of_time_gap(rng):
    other_policy = TimeGapPolicy(T_g_des=2.5, v_des=31.44, v_max=33.528)
    for _ in range(50):
        obs = NeighborObservation(*rng.uniform(1.0, 40.0, size=2),
                                  own_speed=rng.uniform(0, 35),
                                  follow_gap=rng.uniform(1, 40),
                                  follow_speed=rng.uniform(0, 35))
        assert symmetric_lbcm(obs, SYM, POLICY) == symmetric_lbcm(obs, SYM, other_policy)


def test_asymmetry_identity(rng):
    """asym(obs) - sym_with_same_kd1(obs) = k_d2 (d_l - v T_g)."""
    sym_same = ControlGains(k_d1=ASYM.k_d1, k_d2=0.0, k_v=ASYM.k_v, k_c=ASYM.k_c,
                            model_kind="symmetric")
    for _ in range(100):
        obs = NeighborObservation(lead_gap=rng.uniform(1, 50),
                                  lead_speed=rng.uniform(0, 35),
                                  own_speed=rng.uniform(0, 35),
                                  follow_gap=rng.uniform(1, 50),
                                  follow_speed=rng.uniform(0, 35))
        diff = asymmetric_lbcm(obs, ASYM, POLICY) - symmetric_lbcm(obs, sym_same, POLICY)
        expected = ASYM.k_d2 * (obs.lead_gap - obs.own_speed * POLICY.T_g_des)
        assert diff == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_affine_scaling_property(rng):
    """Doubling all error terms doubles the response net of the k_c offset."""
    v = POLICY.v_des
    for _ in range(50):
        dl, df, dv_l, dv_f = rng.uniform(-5, 5, size=4)
        def obs(scale):
            return NeighborObservation(lead_gap=v * 0.8 + scale * dl,
                                       lead_speed=v + scale * dv_l,
                                       own_speed=v,
                                       follow_gap=v * 0.8 + scale * df,
                                       follow_speed=v + scale * dv_f)
        u0 = asymmetric_lbcm(obs(0.0), ASYM, POLICY)
        u1 = asymmetric_lbcm(obs(1.0), ASYM, POLICY)
        u2 = asymmetric_lbcm(obs(2.0), ASYM, POLICY)
        assert u2 - u0 == pytest.approx(2.0 * (u1 - u0), rel=1e-9, abs=1e-9)


def test_bilateral_law_requires_both_neighbors():
    obs = NeighborObservation(lead_gap=25.0, lead_speed=31.44, own_speed=31.44)
    with pytest.raises(ValueError):
        asymmetric_lbcm(obs, ASYM, POLICY)


def test_virtual_follower_control():
    v = 31.44
    assert virtual_follower_control(v * 0.8, v, v, ASYM, POLICY) == 0.0
    u = virtual_follower_control(v * 0.8 + 5.0, v, v, ASYM, POLICY)
    assert u == pytest.approx(1.9589 * 5.0, rel=1e-12)
    # pure speed deficit of 1 m/s activates only the k_c term
    vc = POLICY.v_des - 1.0
    u = virtual_follower_control(vc * POLICY.T_g_des, vc, vc, ASYM, POLICY)
    assert u == pytest.approx(ASYM.k_c, rel=1e-12)


def test_one_sided_last_truck():
    v = 31.44
    eq = NeighborObservation(lead_gap=v * 0.8, lead_speed=v, own_speed=v)
    assert one_sided_last_truck(eq, ASYM, POLICY) == 0.0
    bumped = NeighborObservation(lead_gap=v * 0.8 + 1.0, lead_speed=v, own_speed=v)
    assert one_sided_last_truck(bumped, ASYM, POLICY) == pytest.approx(
        ASYM.k_d1, rel=1e-12)
