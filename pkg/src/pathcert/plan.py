"""Piecewise-polynomial motion plans in TC-space."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "PlanSegment",
    "MotionPlan",
    "PlanContinuityWarning",
    "linear_segment",
    "hermite_cubic_segment",
    "reparametrize_to_unit",
]


class PlanContinuityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PlanSegment:
    """One polynomial piece ``rho(t)``; ``coeffs[var]`` is ascending in ``t``.

    The declared degree of a variable is ``len(coeffs[var]) - 1`` even when
    the leading coefficient happens to be zero.
    """

    coeffs: Mapping[str, np.ndarray]
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        clean = {}
        for v, c in self.coeffs.items():
            arr = np.atleast_1d(np.asarray(c, dtype=float)).copy()
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError(f"coefficients for {v!r} must be a non-empty 1-D list")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite coefficient for {v!r}")
            arr.setflags(write=False)
            clean[v] = arr
        object.__setattr__(self, "coeffs", clean)
        t0, t1 = self.domain
        if not t1 > t0:
            raise ValueError("segment domain must satisfy t0 < t1")
        object.__setattr__(self, "domain", (float(t0), float(t1)))

    @property
    def variables(self) -> list[str]:
        return list(self.coeffs)

    def declared_degree(self, var: str) -> int:
        return len(self.coeffs[var]) - 1

    @property
    def degree(self) -> int:
        return max((self.declared_degree(v) for v in self.coeffs), default=0)

    def evaluate(self, t) -> dict[str, np.ndarray]:
        """Configuration(s) at parameter value(s) ``t``."""
        t = np.asarray(t, dtype=float)
        return {v: P.polyval(t, c) for v, c in self.coeffs.items()}

    def derivative(self, t) -> dict[str, np.ndarray]:
        t = np.asarray(t, dtype=float)
        return {v: P.polyval(t, P.polyder(c)) if c.size > 1 else np.zeros_like(t) for v, c in self.coeffs.items()}

    def to_dict(self) -> dict:
        out = {"coeffs": {v: [float(x) for x in c] for v, c in self.coeffs.items()}}
        if self.domain != (0.0, 1.0):
            out["domain"] = list(self.domain)
        return out


def _as_point(s: Mapping[str, float] | Sequence[float], names: Sequence[str] | None) -> dict[str, float]:
    if isinstance(s, Mapping):
        return {k: float(v) for k, v in s.items()}
    if names is None:
        raise ValueError("variable names required for sequence input")
    if len(s) != len(names):
        raise ValueError(f"expected {len(names)} values, got {len(s)}")
    return dict(zip(names, map(float, s)))


def _check_same_vars(*points: Mapping[str, float]):
    keys = set(points[0])
    for p in points[1:]:
        if set(p) != keys:
            raise ValueError(f"dimension mismatch: {sorted(keys)} vs {sorted(p)}")


def linear_segment(s_start, s_end, names: Sequence[str] | None = None) -> PlanSegment:
    """``rho(t) = s_start + t (s_end - s_start)``."""
    a, b = _as_point(s_start, names), _as_point(s_end, names)
    _check_same_vars(a, b)
    return PlanSegment({v: [a[v], b[v] - a[v]] for v in a})


def hermite_cubic_segment(s0, s1, v0, v1, names: Sequence[str] | None = None) -> PlanSegment:
    """Cubic Hermite piece with ``rho(0)=s0, rho(1)=s1, rho'(0)=v0, rho'(1)=v1``."""
    p0, p1, m0, m1 = (_as_point(x, names) for x in (s0, s1, v0, v1))
    _check_same_vars(p0, p1, m0, m1)
    coeffs = {}
    for v in p0:
        # h00 = 1 - 3t^2 + 2t^3, h10 = t - 2t^2 + t^3, h01 = 3t^2 - 2t^3, h11 = -t^2 + t^3
        c0 = p0[v]
        c1 = m0[v]
        c2 = -3 * p0[v] - 2 * m0[v] + 3 * p1[v] - m1[v]
        c3 = 2 * p0[v] + m0[v] - 2 * p1[v] + m1[v]
        coeffs[v] = [c0, c1, c2, c3]
    return PlanSegment(coeffs)


def reparametrize_to_unit(segment: PlanSegment) -> PlanSegment:
    """Pull a segment on ``[t0, t1]`` back to ``[0, 1]`` via ``t = t0 + u (t1 - t0)``."""
    t0, t1 = segment.domain
    if not t1 > t0:
        raise ValueError("degenerate interval")
    if (t0, t1) == (0.0, 1.0):
        return segment
    affine = np.array([t0, t1 - t0])
    out = {}
    for v, c in segment.coeffs.items():
        acc = np.zeros(len(c))
        power = np.array([1.0])
        for k, ck in enumerate(c):
            acc[: k + 1] += ck * power
            power = P.polymul(power, affine)
        out[v] = acc
    return PlanSegment(out)


@dataclass(frozen=True, eq=False)
class MotionPlan:
    """Ordered segments; each is certified on its own."""

    segments: tuple[PlanSegment, ...]
    knot_mismatch: tuple[float, ...] = field(default=(), init=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        gaps = []
        for k, (a, b) in enumerate(zip(segs, segs[1:])):
            end = a.evaluate(a.domain[1])
            start = b.evaluate(b.domain[0])
            common = set(end) & set(start)
            gap = max((abs(float(end[v]) - float(start[v])) for v in common), default=0.0)
            gaps.append(gap)
            if gap > 1e-9:
                warnings.warn(f"plan is discontinuous at knot {k} (gap {gap:.3g})", PlanContinuityWarning, stacklevel=3)
        object.__setattr__(self, "knot_mismatch", tuple(gaps))

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, i) -> PlanSegment:
        return self.segments[i]

    def unit_segments(self) -> list[PlanSegment]:
        return [reparametrize_to_unit(s) for s in self.segments]
