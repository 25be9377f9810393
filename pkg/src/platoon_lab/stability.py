"""Analytic stability checks for the bilateral control law.

Local stability follows the idealized lag-canceled closed loop (jerk equals
the delayed command divided by the lag), whose per-truck Jacobian has zero
trace: its three eigenvalue real parts always sum to zero, so they can never
all be negative. The functions below report the closed-form real parts, the
numeric eigenvalues, and the literal textbook-style conditions without
asserting that interpretation; the simulator's stability is judged by
simulation, not by this Jacobian.

String stability is the frequency-domain gap-error attenuation test for the
tied-gain law (k_d1 = k_d2): the platoon is string stable when the tail
gap-error transfer magnitude stays below one at every frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import ControlGains


@dataclass(frozen=True)
class LocalStabilityReport:
    x1: float
    x2: float
    eig_real_parts: tuple[float, float, float]   # numeric, ascending
    closed_form_real_parts: tuple[float, float, float] | None
    condition_i_holds: bool
    condition_ii_holds: bool
    degenerate: bool
    eigenvalue_sum: float


@dataclass
class StringStabilityReport:
    omega: np.ndarray
    magnitude: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    sup_magnitude: float
    sup_omega: float
    margin: float           # 1 - sup
    stable: bool
    min_Y: float
    params: dict = field(default_factory=dict)


def local_jacobian(gains: ControlGains, lag: float, tg_des: float) -> np.ndarray:
    """Per-truck Jacobian of the lag-canceled loop with neighbors frozen."""
    if lag <= 0:
        raise ValueError(f"lag must be > 0 (got {lag})")
    return np.array([
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [-(2.0 * gains.k_d1 + gains.k_d2) / lag,
         -(gains.k_d2 * tg_des + 2.0 * gains.k_v + gains.k_c) / lag,
         0.0],
    ])


def _cardano_intermediates(gains: ControlGains, lag: float, tg_des: float):
    x1 = (gains.k_c + 2.0 * gains.k_v + gains.k_d2 * tg_des) / (3.0 * lag)
    x2 = (2.0 * gains.k_d1 + gains.k_d2) / (2.0 * lag)
    return x1, x2


def closed_form_real_parts(gains: ControlGains, lag: float,
                           tg_des: float) -> tuple[float, float, float] | None:
    """Eigenvalue real parts of the zero-trace cubic via Cardano's formula.

    The characteristic polynomial is λ³ + 3 x1 λ + 2 x2 with x1, x2 the
    intermediates below. With C = (sqrt(x2² + x1³) - x2)^(1/3), the real
    root is (C² - x1)/C and the conjugate pair sits at (x1 - C²)/(2C); the
    pair's sign is forced by the zero trace. Returns None in the degenerate
    C = 0 case (all gains zero: triple eigenvalue at the origin).
    """
    x1, x2 = _cardano_intermediates(gains, lag, tg_des)
    radicand = x2 * x2 + x1 ** 3
    if radicand < 0:
        return None
    c = np.cbrt(np.sqrt(radicand) - x2)
    if c == 0.0:
        return None
    real_root = (c * c - x1) / c
    pair = (x1 - c * c) / (2.0 * c)
    out = sorted((float(real_root), float(pair), float(pair)))
    return (out[0], out[1], out[2])


def eigen_real_parts(jacobian: np.ndarray) -> tuple[float, float, float]:
    """Real parts of the Jacobian eigenvalues, ascending."""
    parts = sorted(float(x) for x in np.linalg.eigvals(jacobian).real)
    return (parts[0], parts[1], parts[2])


def local_conditions(gains: ControlGains, lag: float, tg_des: float) -> LocalStabilityReport:
    """Evaluate the literal sign conditions plus the numeric eigenvalues.

    Condition (i): if C > 0 then x1 - C² < 0; condition (ii): if C < 0 then
    x1 - C² > 0, with C the Cardano cube root above. For non-negative gains
    C >= 0 and x1 >= C² always, so condition (i) can only hold vacuously;
    the numeric real parts are reported for independent judgment.
    """
    x1, x2 = _cardano_intermediates(gains, lag, tg_des)
    jac = local_jacobian(gains, lag, tg_des)
    numeric = eigen_real_parts(jac)
    closed = closed_form_real_parts(gains, lag, tg_des)
    degenerate = closed is None

    radicand = x2 * x2 + x1 ** 3
    c = np.cbrt(np.sqrt(radicand) - x2) if radicand >= 0 else float("nan")
    gap = x1 - c * c if np.isfinite(c) else float("nan")
    condition_i = (not c > 0) or (gap < 0)
    condition_ii = (not c < 0) or (gap > 0)

    return LocalStabilityReport(
        x1=x1, x2=x2,
        eig_real_parts=numeric,
        closed_form_real_parts=closed,
        condition_i_holds=bool(condition_i),
        condition_ii_holds=bool(condition_ii),
        degenerate=degenerate,
        eigenvalue_sum=float(sum(numeric)),
    )


def gap_error_transfer(k_d: float, k_v: float, lag: float, delay: float,
                       tg_des: float, omega):
    """Tail gap-error transfer function evaluated as a complex quotient.

    G(s) = (2 k_d + k_v s) e^(-Δs) /
           (T_e s³ + ((2 k_v + k_d T_g) s + 3 k_d) e^(-Δs))  at s = jω.
    """
    s = 1j * np.asarray(omega, dtype=float)
    shift = np.exp(-delay * s)
    num = (2.0 * k_d + k_v * s) * shift
    den = lag * s ** 3 + ((2.0 * k_v + k_d * tg_des) * s + 3.0 * k_d) * shift
    return num / den


def gap_error_gain(k_d: float, k_v: float, lag: float, delay: float,
                   tg_des: float, omega):
    """Closed-form |G(jω)| with its X/(X+Y) decomposition.

    Derived by expanding the complex quotient above:

        |G|² = X / (X + Y),  X = 4 k_d² + k_v² ω²,
        Y = 5 k_d² + (3 k_v² + 4 k_d k_v T_g + k_d² T_g²) ω² + T_e² ω⁶
            + 6 k_d T_e ω³ sin(ωΔ) - 2 (2 k_v + k_d T_g) T_e ω⁴ cos(ωΔ).

    The cross terms carry ω³ sin and ω⁴ cos with the factor 2; variants that
    put ω⁶ on the cosine term do not match the quotient and are rejected by
    the dual-path consistency test.

    Returns (magnitude, X, Y); array-valued for array ω.
    """
    w = np.asarray(omega, dtype=float)
    coupling = 2.0 * k_v + k_d * tg_des
    X = 4.0 * k_d ** 2 + (k_v * w) ** 2
    Y = (5.0 * k_d ** 2
         + (3.0 * k_v ** 2 + 4.0 * k_d * k_v * tg_des + (k_d * tg_des) ** 2) * w ** 2
         + (lag * w ** 3) ** 2
         + 6.0 * k_d * lag * w ** 3 * np.sin(w * delay)
         - 2.0 * coupling * lag * w ** 4 * np.cos(w * delay))
    mag = np.sqrt(X / (X + Y))
    if w.shape == ():
        return float(mag), float(X), float(Y)
    return mag, X, Y


def default_frequency_grid(n_points: int = 2000, w_min: float = 1e-3,
                           w_max: float = 1e3) -> np.ndarray:
    return np.logspace(np.log10(w_min), np.log10(w_max), n_points)


def string_stability_check(gains: ControlGains, lag: float, delay: float,
                           tg_des: float, omega_grid=None) -> StringStabilityReport:
    """Sup of |G(jω)| over a log grid; string stable when the sup is < 1.

    Uses the tied distance gain k_d = k_d1 (the analysis requires
    k_d1 = k_d2; for the symmetric baseline the result describes the
    tied-gain surrogate, not the k_d2 = 0 law).
    """
    if omega_grid is None:
        omega_grid = default_frequency_grid()
    omega_grid = np.asarray(omega_grid, dtype=float)
    k_d = gains.k_d1
    mag, X, Y = gap_error_gain(k_d, gains.k_v, lag, delay, tg_des, omega_grid)
    idx = int(np.argmax(mag))
    sup = float(mag[idx])
    return StringStabilityReport(
        omega=omega_grid, magnitude=mag, X=X, Y=Y,
        sup_magnitude=sup,
        sup_omega=float(omega_grid[idx]),
        margin=1.0 - sup,
        stable=bool(sup < 1.0),
        min_Y=float(Y.min()),
        params={"k_d": k_d, "k_v": gains.k_v, "lag": lag, "delay": delay,
                "tg_des": tg_des, "n_points": int(omega_grid.size)},
    )
