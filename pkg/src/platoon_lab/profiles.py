"""Piecewise-linear speed profiles with exact displacement integrals.

A profile is a non-decreasing sequence of time knots with a speed at each
knot; speed is linear between knots and held constant beyond the ends.
Displacement is the exact integral of the piecewise-linear speed, so leader
kinematics carry no quadrature error.
"""

from __future__ import annotations

import numpy as np


class SpeedProfile:
    """Time → speed map defined by knots, with exact position integration."""

    def __init__(self, t: np.ndarray, v: np.ndarray):
        t = np.asarray(t, dtype=float)
        v = np.asarray(v, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 1:
            raise ValueError("profile needs matching 1-D knot arrays with at least one knot")
        if np.any(np.diff(t) < 0):
            raise ValueError("profile knot times must be non-decreasing")
        if np.any(~np.isfinite(t)) or np.any(~np.isfinite(v)):
            raise ValueError("profile knots must be finite")
        if np.any(v < 0):
            raise ValueError("profile speeds must be >= 0")
        self.t = t
        self.v = v
        # cumulative displacement at each knot (trapezoid is exact here)
        seg = 0.5 * (v[1:] + v[:-1]) * np.diff(t)
        self.s = np.concatenate([[0.0], np.cumsum(seg)])

    @classmethod
    def from_pairs(cls, pairs) -> "SpeedProfile":
        pairs = list(pairs)
        if not pairs:
            raise ValueError("profile needs at least one (t, v) pair")
        t = np.array([float(p[0]) for p in pairs])
        v = np.array([float(p[1]) for p in pairs])
        return cls(t, v)

    @classmethod
    def constant(cls, speed: float, duration: float) -> "SpeedProfile":
        return cls(np.array([0.0, float(duration)]), np.array([float(speed)] * 2))

    def knot_pairs(self):
        return [(float(ti), float(vi)) for ti, vi in zip(self.t, self.v)]

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def covers(self, duration: float) -> bool:
        return self.t_start <= 0.0 and self.t_end >= duration

    def speed_at(self, t):
        """Speed at time(s) t; constant extrapolation beyond the knots."""
        return np.interp(t, self.t, self.v)

    def displacement_at(self, t):
        """Exact distance traveled from the first knot to time(s) t."""
        t_arr = np.asarray(t, dtype=float)
        tc = np.clip(t_arr, self.t[0], self.t[-1])
        idx = np.clip(np.searchsorted(self.t, tc, side="right") - 1, 0, len(self.t) - 2)
        t0, t1 = self.t[idx], self.t[idx + 1]
        v0, v1 = self.v[idx], self.v[idx + 1]
        dt = tc - t0
        width = t1 - t0
        slope = np.where(width > 0, (v1 - v0) / np.where(width > 0, width, 1.0), 0.0)
        local = v0 * dt + 0.5 * slope * dt * dt
        s = self.s[idx] + local
        # constant-speed extrapolation outside the knot range
        s = s + np.where(t_arr > self.t[-1], (t_arr - self.t[-1]) * self.v[-1], 0.0)
        s = s + np.where(t_arr < self.t[0], (t_arr - self.t[0]) * self.v[0], 0.0)
        return s if s.shape else float(s)

    def with_knots_at(self, times) -> "SpeedProfile":
        """Equivalent profile with extra knots inserted at the given times."""
        extra = np.asarray(times, dtype=float)
        keep = extra[(extra > self.t[0]) & (extra < self.t[-1])]
        t = np.unique(np.concatenate([self.t, keep]))
        return SpeedProfile(t, self.speed_at(t))

    def offset_by(self, other_knots_t, delta_fn, lo: float, hi: float) -> "SpeedProfile":
        """Add ``delta_fn(t)`` (piecewise linear between the union of knots)
        to this profile and clamp into [lo, hi], inserting exact knots at
        every clamp crossing."""
        base = self.with_knots_at(other_knots_t)
        t = base.t
        v = base.v + np.array([delta_fn(ti) for ti in t])
        # insert knots where the unclamped line crosses a bound
        ts, vs = [t[0]], [v[0]]
        for i in range(len(t) - 1):
            t0, t1, v0, v1 = t[i], t[i + 1], v[i], v[i + 1]
            for bound in (lo, hi):
                if (v0 - bound) * (v1 - bound) < 0:
                    tc = t0 + (bound - v0) * (t1 - t0) / (v1 - v0)
                    ts.append(tc)
                    vs.append(bound)
            ts.append(t1)
            vs.append(v1)
        ts = np.array(ts)
        vs = np.clip(np.array(vs), lo, hi)
        order = np.argsort(ts, kind="stable")
        return SpeedProfile(ts[order], vs[order])
