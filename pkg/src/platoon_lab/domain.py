"""Shared value objects for platoon scenarios: truck constants, control gains,
time-gap policy, scenario definitions, and the simulation trace container.

All quantities are SI: positions in m, speeds in m/s, accelerations in m/s²,
times in s. Positions refer to a truck's front bumper; the gap to the truck
ahead is ``p_lead - p_self - length``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .profiles import SpeedProfile

# Gravity factor (g expressed in km·h⁻¹·s⁻¹-compatible units) used by the
# rolling-resistance formula of the source truck-dynamics model.
ROLLING_GRAVITY_FACTOR = 9.8066e-3

# Sea-level air constant of the aerodynamic drag term (15 °C air density).
AIR_DRAG_CONSTANT = 0.047285

# Maximum service deceleration for a loaded heavy-duty truck, m/s² (0.21 g).
MAX_DECELERATION = 2.06

# Speed floor used when converting a space gap to a time gap, m/s.
TIME_GAP_SPEED_FLOOR = 0.1

LAST_TRUCK_POLICIES = ("virtual_follower", "one_sided")
MODEL_KINDS = ("asymmetric", "symmetric")
TERMINATION_STATUSES = ("completed", "collision", "diverged")


class ValidationError(ValueError):
    """Raised when a domain object violates one of its invariants.

    ``violations`` lists every violated invariant, each naming the field
    and the bound it broke.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _require(violations: list[str], ok: bool, message: str) -> None:
    if not ok:
        violations.append(message)


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(frozen=True)
class TruckParams:
    """Physical constants of a heavy-duty truck (semi-tractor trailer)."""

    mass: float = 40000.0          # kg
    frontal_area: float = 10.0     # m²
    drag_coeff: float = 0.70
    rolling_coeff: float = 1.5
    rolling_c2: float = 0.0328
    rolling_c3: float = 4.575
    air_const: float = AIR_DRAG_CONSTANT
    altitude: float = 50.0         # m
    length: float = 16.15          # m; cancels out of gap errors but converts positions to gaps

    def violations(self) -> list[str]:
        v: list[str] = []
        _require(v, _finite(self.mass) and self.mass > 0, f"mass must be > 0 (got {self.mass})")
        _require(v, _finite(self.frontal_area) and self.frontal_area > 0,
                 f"frontal_area must be > 0 (got {self.frontal_area})")
        _require(v, _finite(self.drag_coeff) and 0 < self.drag_coeff <= 2,
                 f"drag_coeff must be in (0, 2] (got {self.drag_coeff})")
        _require(v, _finite(self.length) and self.length > 0,
                 f"length must be > 0 (got {self.length})")
        _require(v, _finite(self.altitude) and self.altitude >= 0,
                 f"altitude must be >= 0 (got {self.altitude})")
        for name in ("rolling_coeff", "rolling_c2", "rolling_c3", "air_const"):
            _require(v, _finite(getattr(self, name)) and getattr(self, name) >= 0,
                     f"{name} must be >= 0 (got {getattr(self, name)})")
        return v

    def __post_init__(self):
        v = self.violations()
        if v:
            raise ValidationError(v)


@dataclass(frozen=True)
class PowertrainParams:
    """Lumped actuator model: first-order lag plus pure dead time."""

    lag: float = 0.1     # s, time constant of the acceleration response
    delay: float = 0.1   # s, dead time; must sit on the integration grid

    def violations(self) -> list[str]:
        v: list[str] = []
        _require(v, _finite(self.lag) and self.lag > 0, f"lag must be > 0 (got {self.lag})")
        _require(v, _finite(self.delay) and self.delay >= 0,
                 f"delay must be >= 0 (got {self.delay})")
        return v

    def __post_init__(self):
        v = self.violations()
        if v:
            raise ValidationError(v)

    def delay_steps(self, step: float) -> int:
        """Delay expressed in integration steps; raises unless it is a grid multiple."""
        n = round(self.delay / step)
        if abs(self.delay - n * step) > 1e-9 * max(1.0, abs(self.delay)):
            raise ValidationError(
                [f"delay must be an integer multiple of step (delay={self.delay}, step={step})"])
        return n


@dataclass(frozen=True)
class ControlGains:
    """Control gains of the bilateral car-following law.

    The leading gap is weighted by ``k_d1 + k_d2`` and the following gap by
    ``k_d1``; ``k_d2`` is the extra weight that enforces the constant desired
    time gap. The symmetric baseline is the same law with ``k_d2 = 0``.
    """

    k_d1: float   # s⁻², relative distance gain
    k_d2: float   # s⁻², desired-time-gap feedback gain (0 for the symmetric model)
    k_v: float    # s⁻¹, relative speed gain
    k_c: float    # s⁻¹, desired-speed feedback gain
    model_kind: str = "asymmetric"

    def violations(self) -> list[str]:
        v: list[str] = []
        for name in ("k_d1", "k_d2", "k_v", "k_c"):
            val = getattr(self, name)
            _require(v, _finite(val) and val >= 0, f"{name} must be >= 0 (got {val})")
        _require(v, self.model_kind in MODEL_KINDS,
                 f"model_kind must be one of {MODEL_KINDS} (got {self.model_kind!r})")
        if self.model_kind in MODEL_KINDS:
            _require(v, (self.model_kind == "symmetric") == (self.k_d2 == 0),
                     f"model_kind=symmetric iff k_d2=0 (got {self.model_kind}, k_d2={self.k_d2})")
        return v

    def __post_init__(self):
        v = self.violations()
        if v:
            raise ValidationError(v)


# Tuned gain sets used throughout the bundled scenarios.
DEFAULT_ASYMMETRIC_GAINS = ControlGains(k_d1=1.9589, k_d2=1.9589, k_v=0.52, k_c=0.04,
                                        model_kind="asymmetric")
DEFAULT_SYMMETRIC_GAINS = ControlGains(k_d1=0.8322, k_d2=0.0, k_v=1.6170, k_c=9.927e-4,
                                       model_kind="symmetric")


@dataclass(frozen=True)
class TimeGapPolicy:
    """Constant desired-time-gap policy plus the speed caps of the roadway."""

    T_g_des: float          # s, desired time gap
    v_des: float = 31.44    # m/s, desired cruise speed
    v_max: float = 33.528   # m/s, roadway speed limit; no positive accel at or above it

    def violations(self) -> list[str]:
        v: list[str] = []
        _require(v, _finite(self.T_g_des) and self.T_g_des > 0,
                 f"T_g_des must be > 0 (got {self.T_g_des})")
        _require(v, _finite(self.v_des) and self.v_des > 0,
                 f"v_des must be > 0 (got {self.v_des})")
        _require(v, _finite(self.v_max) and self.v_des <= self.v_max,
                 f"v_des must be <= v_max (got v_des={self.v_des}, v_max={self.v_max})")
        return v

    def __post_init__(self):
        v = self.violations()
        if v:
            raise ValidationError(v)


@dataclass(frozen=True)
class TruckState:
    """Longitudinal state of one truck: front-bumper position, speed, acceleration."""

    p: float
    v: float
    a: float

    def violations(self) -> list[str]:
        v: list[str] = []
        _require(v, _finite(self.p), f"p must be finite (got {self.p})")
        _require(v, _finite(self.v) and self.v >= 0, f"v must be >= 0 (got {self.v})")
        _require(v, _finite(self.a), f"a must be finite (got {self.a})")
        return v

    def __post_init__(self):
        v = self.violations()
        if v:
            raise ValidationError(v)


@dataclass(frozen=True)
class PlatoonScenario:
    """Complete description of one platoon run.

    The leader is kinematic and follows ``leader_profile`` exactly. Followers
    start at their desired gap plus ``initial_gap_offset`` (positive offset =
    too far apart, closing in) at the leader's initial speed.
    """

    follower_count: int
    truck_params: TruckParams
    powertrain: PowertrainParams
    gains: ControlGains
    policy: TimeGapPolicy
    leader_profile: SpeedProfile
    duration: float
    step: float = 0.001
    initial_gap_offset: float = 5.0
    last_truck_policy: str = "virtual_follower"

    def violations(self) -> list[str]:
        v: list[str] = []
        _require(v, isinstance(self.follower_count, int) and self.follower_count >= 1,
                 f"follower_count must be >= 1 (got {self.follower_count})")
        _require(v, _finite(self.duration) and self.duration > 0,
                 f"duration must be > 0 (got {self.duration})")
        _require(v, _finite(self.step) and self.step > 0,
                 f"step must be > 0 (got {self.step})")
        _require(v, self.last_truck_policy in LAST_TRUCK_POLICIES,
                 f"last_truck_policy must be one of {LAST_TRUCK_POLICIES} "
                 f"(got {self.last_truck_policy!r})")
        return v

    def __post_init__(self):
        v = self.violations()
        if v:
            raise ValidationError(v)

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.step)


def validate_scenario(scenario: PlatoonScenario) -> PlatoonScenario:
    """Check every invariant of the scenario and its components.

    Returns the scenario unchanged when everything holds; otherwise raises
    ``ValidationError`` carrying the complete list of violations.
    """
    violations: list[str] = []
    violations += scenario.violations()
    violations += scenario.truck_params.violations()
    violations += scenario.powertrain.violations()
    violations += scenario.gains.violations()
    violations += scenario.policy.violations()

    if scenario.step > 0 and scenario.powertrain.delay >= 0:
        try:
            scenario.powertrain.delay_steps(scenario.step)
        except ValidationError as exc:
            violations += exc.violations

    if scenario.duration > 0 and not scenario.leader_profile.covers(scenario.duration):
        violations.append(
            f"leader_profile must cover [0, duration] "
            f"(profile spans [{scenario.leader_profile.t_start}, "
            f"{scenario.leader_profile.t_end}], duration={scenario.duration})")

    if violations:
        raise ValidationError(violations)
    return scenario


# ---------------------------------------------------------------------------
# Scenario (de)serialization
# ---------------------------------------------------------------------------

def scenario_to_dict(scenario: PlatoonScenario) -> dict:
    d = {
        "follower_count": scenario.follower_count,
        "truck_params": asdict(scenario.truck_params),
        "powertrain": asdict(scenario.powertrain),
        "gains": asdict(scenario.gains),
        "policy": asdict(scenario.policy),
        "leader_profile": [[t, v] for t, v in scenario.leader_profile.knot_pairs()],
        "duration": scenario.duration,
        "step": scenario.step,
        "initial_gap_offset": scenario.initial_gap_offset,
        "last_truck_policy": scenario.last_truck_policy,
    }
    return d


def scenario_from_dict(data: dict, *, base_dir: Path | None = None) -> PlatoonScenario:
    """Build a scenario from a parsed JSON document.

    ``leader_profile`` is either inline ``[[t, v], ...]`` pairs or a path to
    a two-column CSV with header ``t_s,v_mps``; relative paths resolve
    against ``base_dir``.
    """
    violations: list[str] = []
    parts: dict = {}

    def build(name, ctor, payload):
        try:
            parts[name] = ctor(**payload) if isinstance(payload, dict) else ctor(payload)
        except ValidationError as exc:
            violations.extend(exc.violations)
        except TypeError as exc:
            violations.append(f"{name}: {exc}")

    build("truck_params", TruckParams, data.get("truck_params", {}))
    build("powertrain", PowertrainParams, data.get("powertrain", {}))
    build("gains", ControlGains, data.get("gains", {}))
    build("policy", TimeGapPolicy, data.get("policy", {}))

    profile_spec = data.get("leader_profile")
    try:
        if isinstance(profile_spec, str):
            path = Path(profile_spec)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            parts["leader_profile"] = load_profile_csv(path)
        elif isinstance(profile_spec, (list, tuple)):
            parts["leader_profile"] = SpeedProfile.from_pairs(profile_spec)
        else:
            violations.append("leader_profile must be [[t, v], ...] pairs or a CSV path")
    except (ValueError, OSError) as exc:
        violations.append(f"leader_profile: {exc}")

    if violations:
        raise ValidationError(violations)

    try:
        scenario = PlatoonScenario(
            follower_count=data["follower_count"],
            truck_params=parts["truck_params"],
            powertrain=parts["powertrain"],
            gains=parts["gains"],
            policy=parts["policy"],
            leader_profile=parts["leader_profile"],
            duration=data["duration"],
            step=data.get("step", 0.001),
            initial_gap_offset=data.get("initial_gap_offset", 5.0),
            last_truck_policy=data.get("last_truck_policy", "virtual_follower"),
        )
    except KeyError as exc:
        raise ValidationError([f"missing required field {exc}"]) from exc
    return validate_scenario(scenario)


def save_scenario(scenario: PlatoonScenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def load_scenario(path) -> PlatoonScenario:
    path = Path(path)
    data = json.loads(path.read_text())
    return scenario_from_dict(data, base_dir=path.parent)


def load_profile_csv(path) -> SpeedProfile:
    """Read a leader speed profile from a two-column CSV (header t_s,v_mps)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["t_s", "v_mps"]:
            raise ValueError(f"{path}: expected header 't_s,v_mps' (got {header})")
        pairs = [(float(row[0]), float(row[1])) for row in reader if row]
    return SpeedProfile.from_pairs(pairs)


# ---------------------------------------------------------------------------
# Simulation trace
# ---------------------------------------------------------------------------

@dataclass
class SimulationTrace:
    """Recorded closed-loop run: per-step, per-truck channels plus metrics.

    Column 0 of the 2-D arrays is the leader; columns 1..N are followers.
    ``sste``/``ssse`` are always recorded at full step resolution up to the
    termination step, while the truck channels honor ``record_stride``.
    """

    h: float
    record_stride: int
    status: str
    term_step: int                 # index of the last valid full-resolution step
    p: np.ndarray                  # (n_records, N+1)
    v: np.ndarray
    a: np.ndarray
    u: np.ndarray                  # commanded exogenous control; leader column is 0
    sste: np.ndarray               # (term_step+1,)
    ssse: np.ndarray
    truck_length: float
    virt_p: np.ndarray | None = None
    virt_v: np.ndarray | None = None
    summary: dict = field(default_factory=dict)

    @property
    def n_records(self) -> int:
        return self.p.shape[0]

    @property
    def n_followers(self) -> int:
        return self.p.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_records) * (self.h * self.record_stride)

    def gaps(self) -> np.ndarray:
        """Bumper-to-bumper gaps, (n_records, N); column j is follower j+1's lead gap."""
        return self.p[:, :-1] - self.p[:, 1:] - self.truck_length

    def time_gaps(self) -> np.ndarray:
        """Measured time gaps, gap / max(speed, floor)."""
        v = np.maximum(self.v[:, 1:], TIME_GAP_SPEED_FLOOR)
        return self.gaps() / v

    def to_csv(self, path) -> None:
        """Write the trace: t_s, then p_i_m, v_i_mps, a_i_mps2, u_i_mps2 per
        truck (0 = leader), then sste_s2, ssse_mps2."""
        n_trucks = self.p.shape[1]
        header = ["t_s"]
        for i in range(n_trucks):
            header += [f"p_{i}_m", f"v_{i}_mps", f"a_{i}_mps2", f"u_{i}_mps2"]
        header += ["sste_s2", "ssse_mps2"]
        times = self.times
        stride = self.record_stride
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for r in range(self.n_records):
                k = r * stride  # full-resolution step index of this record
                row = [repr(times[r])]
                for i in range(n_trucks):
                    row += [repr(self.p[r, i]), repr(self.v[r, i]),
                            repr(self.a[r, i]), repr(self.u[r, i])]
                row += [repr(float(self.sste[k])), repr(float(self.ssse[k]))]
                writer.writerow(row)
