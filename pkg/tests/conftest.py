import numpy as np
import pytest

from platoon_lab import (DEFAULT_ASYMMETRIC_GAINS, DEFAULT_SYMMETRIC_GAINS,
                         PlatoonScenario, PowertrainParams, SpeedProfile,
                         TimeGapPolicy, TruckParams)


@pytest.fixture
def truck_params():
    return TruckParams()


def make_scenario(*, gains=DEFAULT_ASYMMETRIC_GAINS, followers=5, lag=0.1,
                  delay=0.1, tg_des=0.8, v_des=31.44, duration=60.0,
                  step=0.001, offset=5.0, profile=None,
                  last_truck_policy="virtual_follower"):
    if profile is None:
        profile = SpeedProfile.constant(v_des, duration)
    return PlatoonScenario(
        follower_count=followers,
        truck_params=TruckParams(),
        powertrain=PowertrainParams(lag=lag, delay=delay),
        gains=gains,
        policy=TimeGapPolicy(T_g_des=tg_des, v_des=v_des),
        leader_profile=profile,
        duration=duration,
        step=step,
        initial_gap_offset=offset,
        last_truck_policy=last_truck_policy,
    )


@pytest.fixture
def scenario_factory():
    return make_scenario


@pytest.fixture
def asym_gains():
    return DEFAULT_ASYMMETRIC_GAINS


@pytest.fixture
def sym_gains():
    return DEFAULT_SYMMETRIC_GAINS


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
