"""Truck-platoon simulation and analysis toolkit.

Simulates closely coupled automated truck platoons under an asymmetric
linear bilateral control law (and its symmetric baseline), with analytic
local/string stability checks, operational-efficiency metrics, and a
genetic-algorithm gain tuner.
"""

from .domain import (ControlGains, DEFAULT_ASYMMETRIC_GAINS, DEFAULT_SYMMETRIC_GAINS,
                     PlatoonScenario, PowertrainParams, SimulationTrace,
                     TimeGapPolicy, TruckParams, TruckState, ValidationError,
                     load_scenario, save_scenario, validate_scenario)
from .kernel import BACKEND
from .profiles import SpeedProfile
from .simulator import (LeaderSchedule, PerturbationSpec, ScheduleSegment,
                        apply_perturbation, default_evaluation_schedule,
                        gain_design_profile, generate_leader_profile, run_platoon)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ControlGains",
    "DEFAULT_ASYMMETRIC_GAINS",
    "DEFAULT_SYMMETRIC_GAINS",
    "LeaderSchedule",
    "PerturbationSpec",
    "PlatoonScenario",
    "PowertrainParams",
    "ScheduleSegment",
    "SimulationTrace",
    "SpeedProfile",
    "TimeGapPolicy",
    "TruckParams",
    "TruckState",
    "ValidationError",
    "apply_perturbation",
    "default_evaluation_schedule",
    "gain_design_profile",
    "generate_leader_profile",
    "load_scenario",
    "run_platoon",
    "save_scenario",
    "validate_scenario",
]
