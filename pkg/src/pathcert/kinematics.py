"""Algebraic kinematic chains and their rational forward kinematics.

Revolute joints are parametrized by ``tau = tan(theta / 2)`` so that

    cos(theta) = (1 - tau^2) / (1 + tau^2),   sin(theta) = 2 tau / (1 + tau^2),

and every point position becomes a rational function of the joint variables
whose denominator is a product of ``1 + tau_i^2`` factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .polynomial import Polynomial, RationalFunction

__all__ = [
    "REVOLUTE",
    "PRISMATIC",
    "FIXED",
    "WORLD",
    "Joint",
    "Link",
    "KinematicChain",
    "RationalFK",
    "rpy_matrix",
    "forward_kinematics_rational",
    "compose_with_plan",
    "numeric_link_transforms",
    "numeric_point_positions",
    "tc_to_angle",
    "angle_to_tc",
]

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"
WORLD = "world"


def rpy_matrix(rpy: Sequence[float]) -> np.ndarray:
    """Rotation ``Rz(yaw) @ Ry(pitch) @ Rx(roll)`` (fixed-axis roll-pitch-yaw)."""
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def tc_to_angle(tau):
    return 2.0 * np.arctan(tau)


def angle_to_tc(theta):
    return np.tan(np.asarray(theta) / 2.0)


@dataclass(frozen=True)
class Joint:
    """Rigid origin transform followed by a 1-DOF motion about/along ``axis``."""

    kind: str
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    origin_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    origin_xyz: tuple[float, float, float] = (0.0, 0.0, 0.0)
    limits: tuple[float, float] | None = None
    variable: str | None = None

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC, FIXED):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        if self.kind != FIXED:
            norm = math.sqrt(sum(a * a for a in self.axis))
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"joint axis must be unit length (norm={norm!r})")
            if self.variable is None:
                raise ValueError("movable joint needs a variable name")
        if self.limits is not None:
            lo, hi = self.limits
            if not lo < hi:
                raise ValueError("joint limits must satisfy lo < hi")
            if self.kind == REVOLUTE and not (-math.pi < lo and hi < math.pi):
                raise ValueError("revolute limits must lie strictly inside (-pi, pi)")

    @property
    def origin_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = rpy_matrix(self.origin_rpy)
        T[:3, 3] = self.origin_xyz
        return T


@dataclass(frozen=True)
class Link:
    name: str
    parent: str
    joint: Joint


@dataclass(frozen=True)
class KinematicChain:
    """Tree of links rooted at the implicit ``world`` link."""

    links: tuple[Link, ...] = ()

    def __post_init__(self):
        names = [WORLD]
        seen_vars = set()
        for link in self.links:
            if link.name in names:
                raise ValueError(f"duplicate link {link.name!r}")
            if link.parent not in names:
                raise ValueError(f"link {link.name!r} references unknown (or later) parent {link.parent!r}")
            names.append(link.name)
            v = link.joint.variable
            if link.joint.kind != FIXED:
                if v in seen_vars:
                    raise ValueError(f"duplicate joint variable {v!r}")
                seen_vars.add(v)

    @property
    def link_names(self) -> list[str]:
        return [WORLD] + [l.name for l in self.links]

    @property
    def movable_links(self) -> list[Link]:
        return [l for l in self.links if l.joint.kind != FIXED]

    @property
    def variables(self) -> list[str]:
        """TC-space variable ids in link order."""
        return [l.joint.variable for l in self.movable_links]

    @property
    def variable_kinds(self) -> dict[str, str]:
        return {l.joint.variable: l.joint.kind for l in self.movable_links}

    @property
    def dof(self) -> int:
        return len(self.movable_links)

    def link(self, name: str) -> Link:
        for l in self.links:
            if l.name == name:
                return l
        raise KeyError(f"unknown link {name!r}")

    def ancestry(self, name: str) -> list[str]:
        """Links from ``name`` up to and including ``world``."""
        if name != WORLD and name not in self.link_names:
            raise KeyError(f"unknown link {name!r}")
        path = [name]
        while path[-1] != WORLD:
            path.append(self.link(path[-1]).parent)
        return path

    def path_variables(self, frame: str, link: str) -> list[str]:
        """Joint variables on the kinematic path between two links."""
        up_f, up_l = self.ancestry(frame), self.ancestry(link)
        common = next(n for n in up_f if n in up_l)
        names = up_f[: up_f.index(common)] + up_l[: up_l.index(common)]
        return [self.link(n).joint.variable for n in names if self.link(n).joint.kind != FIXED]


# -- rational transforms ------------------------------------------------------

_ONE = Polynomial.constant(1)
_ZERO = Polynomial()


@dataclass(frozen=True)
class _RTransform:
    """Homogeneous transform ``[R | p] / den`` with polynomial entries."""

    R: tuple  # 3x3 Polynomials
    p: tuple  # 3 Polynomials
    den: Polynomial

    @staticmethod
    def constant(T: np.ndarray) -> "_RTransform":
        R = tuple(tuple(Polynomial.constant(float(T[i, j])) for j in range(3)) for i in range(3))
        p = tuple(Polynomial.constant(float(T[i, 3])) for i in range(3))
        return _RTransform(R, p, _ONE)

    def __matmul__(self, other: "_RTransform") -> "_RTransform":
        R = tuple(
            tuple(sum((self.R[i][k] * other.R[k][j] for k in range(3)), _ZERO) for j in range(3)) for i in range(3)
        )
        p = tuple(
            sum((self.R[i][k] * other.p[k] for k in range(3)), _ZERO) + self.p[i] * other.den for i in range(3)
        )
        return _RTransform(R, p, self.den * other.den)

    def apply(self, point: Sequence[float]) -> tuple[Polynomial, ...]:
        return tuple(
            sum((self.R[i][k] * float(point[k]) for k in range(3)), _ZERO) + self.p[i] for i in range(3)
        )


def _skew(k) -> np.ndarray:
    return np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])


def _joint_motion(joint: Joint, inverse: bool = False) -> _RTransform:
    if joint.kind == FIXED:
        return _RTransform.constant(np.eye(4))
    v = Polynomial.variable(joint.variable)
    sign = -1.0 if inverse else 1.0
    if joint.kind == PRISMATIC:
        R = tuple(tuple(_ONE if i == j else _ZERO for j in range(3)) for i in range(3))
        p = tuple(v * (sign * joint.axis[i]) for i in range(3))
        return _RTransform(R, p, _ONE)
    # (1 + tau^2) R(theta) = (1 + tau^2) I + 2 tau K + 2 tau^2 K^2
    K = _skew(joint.axis)
    K2 = K @ K
    one_plus = _ONE + v * v
    tau2 = v * v
    R = tuple(
        tuple(
            (one_plus if i == j else _ZERO) + v * (2.0 * sign * K[i, j]) + tau2 * (2.0 * K2[i, j])
            for j in range(3)
        )
        for i in range(3)
    )
    return _RTransform(R, (_ZERO, _ZERO, _ZERO), one_plus)


def _link_transform(link: Link, inverse: bool = False) -> _RTransform:
    O = link.joint.origin_matrix
    if not inverse:
        return _RTransform.constant(O) @ _joint_motion(link.joint)
    Oinv = np.eye(4)
    Oinv[:3, :3] = O[:3, :3].T
    Oinv[:3, 3] = -O[:3, :3].T @ O[:3, 3]
    return _joint_motion(link.joint, inverse=True) @ _RTransform.constant(Oinv)


def _relative_transform(chain: KinematicChain, frame: str, link: str) -> _RTransform:
    up_f, up_l = chain.ancestry(frame), chain.ancestry(link)
    common = next(n for n in up_f if n in up_l)
    T = _RTransform.constant(np.eye(4))
    for name in up_f[: up_f.index(common)]:
        T = T @ _link_transform(chain.link(name), inverse=True)
    for name in reversed(up_l[: up_l.index(common)]):
        T = T @ _link_transform(chain.link(name))
    return T


@dataclass(frozen=True)
class RationalFK:
    """Position of a point fixed in ``link`` expressed in ``frame``.

    All three components share one positive denominator.
    """

    frame: str
    link: str
    point: tuple[float, float, float]
    components: tuple[RationalFunction, RationalFunction, RationalFunction]
    path_kinds: Mapping[str, str] = field(default_factory=dict)
    degree_bound: int | None = None

    @property
    def numerators(self) -> tuple[Polynomial, Polynomial, Polynomial]:
        return tuple(c.numerator for c in self.components)

    @property
    def denominator(self) -> Polynomial:
        return self.components[0].denominator

    def evaluate(self, point: Mapping[str, float]) -> np.ndarray:
        return np.array([float(c(point)) for c in self.components])


def forward_kinematics_rational(chain: KinematicChain, frame: str, link: str, point: Sequence[float]) -> RationalFK:
    """Exact rational position of ``point`` (fixed in ``link``) seen from ``frame``."""
    T = _relative_transform(chain, frame, link)
    nums = T.apply(point)
    comps = tuple(RationalFunction(n, T.den, True) for n in nums)
    kinds = {v: chain.variable_kinds[v] for v in chain.path_variables(frame, link)}
    return RationalFK(frame, link, tuple(float(c) for c in point), comps, kinds)


def compose_with_plan(fk: RationalFK, segment, var: str = "t") -> RationalFK:
    """Substitute a plan segment into ``fk``; the result is univariate in ``var``.

    ``degree_bound`` on the result is ``sum(2 * deg rho_i)`` over revolute
    variables plus ``sum(deg rho_i)`` over prismatic ones, using each
    segment polynomial's declared degree.
    """
    missing = [v for v in fk.path_kinds if v not in segment.coeffs]
    if missing:
        raise KeyError(f"segment does not bind {missing}")
    bindings = {v: Polynomial.from_coeffs(segment.coeffs[v], var) for v in fk.path_kinds}
    comps = tuple(c.substitute(bindings) for c in fk.components)
    bound = 0
    for v, kind in fk.path_kinds.items():
        d = segment.declared_degree(v)
        bound += 2 * d if kind == REVOLUTE else d
    return RationalFK(fk.frame, fk.link, fk.point, comps, {}, bound)


# -- numeric forward kinematics (independent oracle) ----------------------------


def numeric_link_transforms(chain: KinematicChain, config: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """World transforms of every link for a batch of TC-space configurations.

    ``config`` maps variable ids to arrays of shape ``(N,)``; revolute values
    are tan-half-angles and are converted back to angles here.
    """
    n = None
    for v in chain.variables:
        arr = np.atleast_1d(np.asarray(config[v], dtype=float))
        n = arr.shape[0] if n is None else n
    n = 1 if n is None else n
    out = {WORLD: np.broadcast_to(np.eye(4), (n, 4, 4)).copy()}
    for link in chain.links:
        j = link.joint
        O = np.eye(4)
        O[:3, :3] = Rotation.from_euler("xyz", j.origin_rpy).as_matrix()
        O[:3, 3] = j.origin_xyz
        M = np.broadcast_to(O, (n, 4, 4)).copy()
        if j.kind == REVOLUTE:
            theta = tc_to_angle(np.atleast_1d(np.asarray(config[j.variable], dtype=float)))
            J = np.broadcast_to(np.eye(4), (n, 4, 4)).copy()
            J[:, :3, :3] = Rotation.from_rotvec(np.outer(theta, j.axis)).as_matrix()
            M = M @ J
        elif j.kind == PRISMATIC:
            z = np.atleast_1d(np.asarray(config[j.variable], dtype=float))
            J = np.broadcast_to(np.eye(4), (n, 4, 4)).copy()
            J[:, :3, 3] = np.outer(z, j.axis)
            M = M @ J
        out[link.name] = out[link.parent] @ M
    return out


def numeric_point_positions(transforms: Mapping[str, np.ndarray], link: str, points) -> np.ndarray:
    """World coordinates ``(N, k, 3)`` of points ``(k, 3)`` fixed in ``link``."""
    T = transforms[link]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.einsum("nij,kj->nki", T[:, :3, :3], pts) + T[:, None, :3, 3]
