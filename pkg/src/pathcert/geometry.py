"""Convex collision bodies and separation-distance oracles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Sphere",
    "Polytope",
    "ConvexBody",
    "CollisionPair",
    "min_norm_point",
    "min_distance",
    "batch_min_distance",
]


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float
    link: str = "world"
    name: str | None = None

    kind = "sphere"

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        if not np.all(np.isfinite(c)):
            raise ValueError("sphere center must be finite")
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def points(self) -> np.ndarray:
        """Geometry-defining points (the center)."""
        return self.center[None, :]

    def placed(self, points: np.ndarray) -> "Sphere":
        return Sphere(np.asarray(points).reshape(3), self.radius, self.link, self.name)

    def translated(self, offset) -> "Sphere":
        return Sphere(self.center + np.asarray(offset, dtype=float), self.radius, self.link, self.name)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of ``vertices``."""

    vertices: np.ndarray
    link: str = "world"
    name: str | None = None

    kind = "polytope"

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 1 or v.shape[1] != 3:
            raise ValueError("polytope needs at least one 3-D vertex")
        if not np.all(np.isfinite(v)):
            raise ValueError("polytope vertices must be finite")
        object.__setattr__(self, "vertices", v)

    @property
    def points(self) -> np.ndarray:
        return self.vertices

    def placed(self, points: np.ndarray) -> "Polytope":
        return Polytope(np.asarray(points).reshape(-1, 3), self.link, self.name)

    def translated(self, offset) -> "Polytope":
        return Polytope(self.vertices + np.asarray(offset, dtype=float), self.link, self.name)


ConvexBody = Union[Sphere, Polytope]


@dataclass(frozen=True)
class CollisionPair:
    """Unordered pair of body indices, stored as given (first is side A)."""

    a: int
    b: int

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("a collision pair needs two distinct bodies")

    @property
    def key(self) -> tuple[int, int]:
        return (min(self.a, self.b), max(self.a, self.b))


def _affine_minimizer(Q: np.ndarray) -> np.ndarray:
    """Weights (summing to one) of the min-norm point of the affine hull of rows of Q."""
    k = Q.shape[0]
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = Q @ Q.T
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k]


def min_norm_point(P: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> tuple[np.ndarray, float]:
    """Minimum-norm point of the convex hull of the rows of ``P``.

    Wolfe's active-set method over the simplex of vertex weights.

    Returns
    -------
    x : ndarray, shape (d,)
        The minimum-norm point.
    lower : float
        A certified lower bound on ``||x||`` from the supporting hyperplane
        orthogonal to ``x``.
    """
    P = np.asarray(P, dtype=float)
    scale2 = max(float(np.max(np.einsum("ij,ij->i", P, P))), 1e-300)
    j = int(np.argmin(np.einsum("ij,ij->i", P, P)))
    S = [j]
    w = np.array([1.0])
    x = P[j].copy()
    eps = 1e-14
    for _ in range(max_iter):
        xx = float(x @ x)
        if xx <= tol * tol * scale2:
            break
        dots = P @ x
        i = int(np.argmin(dots))
        if xx - dots[i] <= tol * scale2 or i in S:
            break
        S.append(i)
        w = np.append(w, 0.0)
        for _ in range(len(P) + 2):
            v = _affine_minimizer(P[S])
            if np.all(v > eps):
                w = v
                break
            neg = v <= eps
            denom = w[neg] - v[neg]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom > 0, w[neg] / denom, np.inf)
            theta = min(1.0, float(np.min(ratios)))
            w = (1 - theta) * w + theta * v
            keep = w > eps
            if not np.any(keep):
                keep[np.argmax(w)] = True
            S = [s for s, k in zip(S, keep) if k]
            w = w[keep]
            w = w / w.sum()
        x = w @ P[S]
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        return x, 0.0
    lower = max(0.0, float(np.min(P @ x)) / nx)
    return x, lower


def _canonical(a: ConvexBody, b: ConvexBody) -> tuple[ConvexBody, ConvexBody]:
    def key(body):
        return (body.kind, body.points.shape[0], body.points.tobytes(), getattr(body, "radius", 0.0))

    return (a, b) if key(a) <= key(b) else (b, a)


def min_distance(a: ConvexBody, b: ConvexBody, tol: float = 1e-10) -> float:
    """Separation distance between two placed bodies; ``<= 0`` iff they intersect.

    Negative values only occur for spheres (center-distance minus radii);
    intersecting polytopes report 0.
    """
    a, b = _canonical(a, b)
    if a.kind == "sphere" and b.kind == "sphere":
        return float(np.linalg.norm(a.center - b.center) - a.radius - b.radius)
    if a.kind == "sphere" or b.kind == "sphere":
        s, p = (a, b) if a.kind == "sphere" else (b, a)
        x, _ = min_norm_point(p.vertices - s.center, tol)
        d = float(np.linalg.norm(x))
        if d <= tol * max(1.0, float(np.abs(p.vertices - s.center).max())):
            d = 0.0
        return d - s.radius
    diff = (a.vertices[:, None, :] - b.vertices[None, :, :]).reshape(-1, 3)
    x, _ = min_norm_point(diff, tol)
    d = float(np.linalg.norm(x))
    if d <= tol * max(1.0, float(np.abs(diff).max())):
        return 0.0
    return d


def _lower_bound_batch(kind_a, pa, ra, kind_b, pb, rb) -> np.ndarray:
    """Cheap certified lower bounds on separation for a batch of placements.

    ``pa``/``pb`` have shape ``(N, k, 3)``. Bounds use separating-axis tests on
    the centroid direction and the coordinate axes.
    """
    ca, cb = pa.mean(axis=1), pb.mean(axis=1)
    axes = [cb - ca, np.broadcast_to(np.eye(3)[0], ca.shape), np.broadcast_to(np.eye(3)[1], ca.shape),
            np.broadcast_to(np.eye(3)[2], ca.shape)]
    best = np.full(ca.shape[0], -np.inf)
    for u in axes:
        n = np.linalg.norm(u, axis=1, keepdims=True)
        u = np.divide(u, n, out=np.zeros_like(u), where=n > 0)
        proj_a = np.einsum("nkj,nj->nk", pa, u)
        proj_b = np.einsum("nkj,nj->nk", pb, u)
        gap1 = proj_b.min(axis=1) - rb - (proj_a.max(axis=1) + ra)
        gap2 = proj_a.min(axis=1) - ra - (proj_b.max(axis=1) + rb)
        best = np.maximum(best, np.maximum(gap1, gap2))
    return best


def batch_min_distance(body_a: ConvexBody, pa: np.ndarray, body_b: ConvexBody, pb: np.ndarray,
                       stop_at_first_collision: bool = False) -> np.ndarray:
    """Separation for a batch of placements of two bodies.

    ``pa`` and ``pb`` hold world coordinates of each body's defining points,
    shape ``(N, k, 3)``. Entries proven positive by a cheap bound are returned
    as that (positive) bound; everything else is computed exactly. With
    ``stop_at_first_collision`` the scan stops at the first sample with
    distance ``<= 0`` and later undecided samples are left as ``nan``.
    """
    n = pa.shape[0]
    if body_a.kind == "sphere" and body_b.kind == "sphere":
        return np.linalg.norm(pa[:, 0] - pb[:, 0], axis=1) - body_a.radius - body_b.radius
    ra = body_a.radius if body_a.kind == "sphere" else 0.0
    rb = body_b.radius if body_b.kind == "sphere" else 0.0
    out = _lower_bound_batch(body_a.kind, pa, ra, body_b.kind, pb, rb)
    undecided = np.flatnonzero(~(out > 0))
    out[undecided] = np.nan
    for i in undecided:
        d = min_distance(body_a.placed(pa[i]), body_b.placed(pb[i]))
        out[i] = d
        if stop_at_first_collision and d <= 0:
            break
    return out
