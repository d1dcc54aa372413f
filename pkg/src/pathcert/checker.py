"""Independent certificate verification, sampling falsification and plan verdicts.

The verifier never reuses the SDP lowering. It rebuilds every condition from
the chain with :class:`~pathcert.polynomial.Polynomial` arithmetic, multiplies
out the multipliers from their Gram matrices and bounds the leftover on
``[0, 1]`` by the sum of its absolute coefficients.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .conic import SolverOptions, solve_feasibility
from .geometry import batch_min_distance, min_distance
from .kinematics import FIXED, REVOLUTE, WORLD, forward_kinematics_rational, numeric_link_transforms, \
    numeric_point_positions
from .plan import MotionPlan, PlanSegment
from .polynomial import Polynomial, substitute, univariate_coeff_vector
from .soscert import GAMMA_MIN, Certificate, ConstraintCertificate, assemble_pair_program, decomposition_template

__all__ = [
    "VERIFIED",
    "REJECTED",
    "SAFE",
    "NSAFE",
    "EPS_PSD",
    "ConstraintCheck",
    "CheckReport",
    "check_decomposition",
    "verify_certificate",
    "CollisionFound",
    "NoneFound",
    "sample_falsify",
    "placed_distance",
    "CellResult",
    "PlanReport",
    "certify_cell",
    "certify_plan",
]

VERIFIED, REJECTED = "Verified", "Rejected"
SAFE, NSAFE = "SAFE", "NSAFE"
EPS_PSD = 1e-9


# -- reports ----------------------------------------------------------------------


@dataclass
class ConstraintCheck:
    label: str
    ok: bool
    residual_l1: float = float("nan")
    residual_inf: float = float("nan")
    gamma: float = float("nan")
    min_eig_lambda: float = float("nan")
    min_eig_nu: float = float("nan")
    moved_mass: float = 0.0
    reason: str = ""

    def to_dict(self) -> dict:
        return {k: (v if not isinstance(v, float) or np.isfinite(v) else None) for k, v in self.__dict__.items()}


@dataclass
class CheckReport:
    verdict: str
    constraints: list[ConstraintCheck] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return self.verdict == VERIFIED

    @property
    def max_residual(self) -> float:
        return max((c.residual_l1 for c in self.constraints), default=0.0)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "diagnostics": list(self.diagnostics),
                "constraints": [c.to_dict() for c in self.constraints]}


# -- constraint-level check ---------------------------------------------------------


def _sym_exact(Q: np.ndarray) -> list[list[Fraction]]:
    n = Q.shape[0]
    F = [[Fraction(float(v)) for v in row] for row in Q]
    return [[(F[i][j] + F[j][i]) / 2 for j in range(n)] for i in range(n)]


def _exact_psd(Q: list[list[Fraction]]) -> bool:
    """Exact PSD test by symmetric Gaussian elimination."""
    A = [row[:] for row in Q]
    n = len(A)
    for k in range(n):
        p = A[k][k]
        if p < 0:
            return False
        if p == 0:
            if any(A[k][j] != 0 for j in range(k + 1, n)):
                return False
            continue
        for i in range(k + 1, n):
            if A[i][k] == 0:
                continue
            f = A[i][k] / p
            Ai, Ak = A[i], A[k]
            for j in range(k + 1, n):
                if Ak[j]:
                    Ai[j] -= f * Ak[j]
    return True


def _prepare_gram(Q, exact: bool):
    """Symmetrized, PSD-enforced Gram; returns (matrix, min eigenvalue, moved mass) or a failure reason."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.all(np.isfinite(Q)):
        return None, "Gram matrix is not a finite square matrix"
    S = 0.5 * (Q + Q.T)
    lam, V = np.linalg.eigh(S)
    lmin = float(lam.min()) if lam.size else 0.0
    if lmin < -EPS_PSD:
        return None, f"Gram matrix not PSD (min eigenvalue {lmin:.3e})"
    if not exact:
        neg = lam < 0
        mass = float(-lam[neg].sum())
        if mass:
            S = (V * np.maximum(lam, 0.0)) @ V.T
            S = 0.5 * (S + S.T)
        return (S, lmin, mass), ""
    F = _sym_exact(Q)
    if _exact_psd(F):
        return (F, lmin, 0.0), ""
    scale = max(1.0, float(np.abs(S).max()))
    shift = Fraction(2.0 * max(-lmin, 0.0) + 2.0 ** -40 * scale)
    G = [[F[i][j] + (shift if i == j else 0) for j in range(len(F))] for i in range(len(F))]
    if not _exact_psd(G):
        return None, "Gram matrix not PSD in exact arithmetic"
    return (G, lmin, float(shift) * len(F)), ""


def _block_series(Q, m: int, half: int, a: int, b: int, zero):
    """Coefficients of ``sum_{i,j} Q[(a,i),(b,j)] t^(i+j)``."""
    h1 = half + 1
    out = [zero] * (2 * half + 1)
    for i in range(h1):
        row = Q[a * h1 + i]
        for j in range(h1):
            v = row[b * h1 + j]
            if v:
                out[i + j] = out[i + j] + v
    return out


def _times_weight(series, weight, length, zero, conv):
    out = [zero] * length
    for u, w in enumerate(weight):
        if not w:
            continue
        w = conv(w)
        for k, c in enumerate(series):
            if c:
                out[k + u] = out[k + u] + w * c
    return out


def check_decomposition(M, target_degree: int, gram_lambda, gram_nu, gamma: float, *, exact: bool = False,
                        var: str = "t", label: str = "") -> ConstraintCheck:
    """Check ``M(t) = w_l lambda + w_n nu + gamma I`` up to a residual bounded by ``gamma``.

    ``M`` is an ``m x m`` nested list of univariate :class:`Polynomial` entries
    (or an array of coefficients with shape ``(m, m, n+1)``). Verified means the
    Grams are PSD and the residual's absolute coefficient sum, summed over the
    upper triangle, is at most ``gamma``; this bounds ``|y^T R(t) y|`` by
    ``gamma |y|^2`` on ``[0, 1]`` so ``M(t)`` is PSD there.
    """
    zero = Fraction(0) if exact else 0.0
    conv = Fraction if exact else float
    if isinstance(M, np.ndarray):
        m = M.shape[0]
        coeffs = [[[conv(float(c)) for c in M[a, b]] for b in range(m)] for a in range(m)]
    else:
        m = len(M)
        coeffs = []
        for a in range(m):
            row = []
            for b in range(m):
                p = M[a][b]
                p = p.to_exact() if exact else p.to_float()
                row.append([conv(c) if not exact else c for c in univariate_coeff_vector(p, var)])
            coeffs.append(row)
    fail = lambda reason, **kw: ConstraintCheck(label, False, reason=reason, **kw)  # noqa: E731
    tpl = decomposition_template(target_degree)
    n = target_degree
    for a in range(m):
        for b in range(m):
            c = coeffs[a][b]
            while len(c) > n + 1 and c[-1] == 0:
                c.pop()
            if len(c) > n + 1:
                return fail(f"constraint entry ({a},{b}) has degree {len(c) - 1} > {n}")
            if a > b and c + [zero] * (n + 1 - len(c)) != coeffs[b][a] + [zero] * (n + 1 - len(coeffs[b][a])):
                return fail("constraint matrix is not symmetric")
    lam_size, nu_size = tpl.gram_sizes(m)
    if np.shape(gram_lambda) != (lam_size, lam_size):
        return fail(f"lambda Gram has shape {np.shape(gram_lambda)}, expected {(lam_size, lam_size)}")
    if nu_size == 0:
        if gram_nu is not None and np.size(gram_nu) != 0:
            return fail("nu Gram present but the template has no nu term")
    elif gram_nu is None or np.shape(gram_nu) != (nu_size, nu_size):
        return fail(f"nu Gram has shape {np.shape(gram_nu)}, expected {(nu_size, nu_size)}")
    if not (np.isfinite(gamma) and gamma > 0):
        return fail("slack margin must be positive and finite")

    prepared = []
    for Q in (gram_lambda, gram_nu if nu_size else None):
        if Q is None:
            prepared.append(None)
            continue
        res, why = _prepare_gram(Q, exact)
        if res is None:
            return fail(why)
        prepared.append(res)
    g = Fraction(float(gamma)) if exact else float(gamma)

    def residual_for(grams):
        total, worst = zero, zero
        for a in range(m):
            for b in range(a, m):
                r = coeffs[a][b] + [zero] * (n + 1 - len(coeffs[a][b]))
                parts = [(grams[0], tpl.weight_lambda, tpl.lambda_half)]
                if grams[1] is not None:
                    parts.append((grams[1], tpl.weight_nu, tpl.nu_half))
                for Q, weight, half in parts:
                    s = _block_series(Q, m, half, a, b, zero)
                    for k, v in enumerate(_times_weight(s, weight, n + 1, zero, conv)):
                        r[k] = r[k] - v
                if a == b:
                    r[0] = r[0] - g
                total = total + sum(abs(v) for v in r)
                worst = max([worst] + [abs(v) for v in r])
        return total, worst

    grams = [None if p is None else p[0] for p in prepared]
    total, worst = residual_for(grams)
    mass = sum(p[2] for p in prepared if p is not None)
    if not exact and mass:
        raw = [None if Q is None else 0.5 * (np.asarray(Q, float) + np.asarray(Q, float).T)
               for Q in (gram_lambda, gram_nu if nu_size else None)]
        before, _ = residual_for(raw)
        dim = max(lam_size, nu_size)
        if abs(total - before) > 3.0 * dim * mass * (1 + 1e-9) + 1e-15:
            return fail("eigenvalue projection moved the residual more than its mass allows")
    chk = ConstraintCheck(label, bool(total <= g), float(total), float(worst), float(gamma),
                          prepared[0][1], prepared[1][1] if prepared[1] is not None else float("nan"), mass)
    if not chk.ok:
        chk.reason = f"residual {float(total):.3e} exceeds slack {float(gamma):.3e}"
    return chk


# -- rebuilding pair conditions ---------------------------------------------------


def _path_degree_bound(chain, link: str, segment: PlanSegment) -> int:
    bound = 0
    name = link
    while name != WORLD:
        lk = chain.link(name)
        j = lk.joint
        if j.kind != FIXED:
            d = len(segment.coeffs[j.variable]) - 1
            bound += 2 * d if j.kind == REVOLUTE else d
        name = lk.parent
    return bound


def _expected_denominator(chain, link: str, bindings) -> Polynomial:
    g = Polynomial.constant(1)
    name = link
    while name != WORLD:
        lk = chain.link(name)
        if lk.joint.kind == REVOLUTE:
            r = bindings[lk.joint.variable]
            g = g * (Polynomial.constant(1) + r * r)
        name = lk.parent
    return g


def _rebuild_condition(chain, body, point, segment: PlanSegment, a_polys, b_poly, sign: int, exact: bool):
    """Constraint matrix entries (Polynomials in ``t``) for one condition, or raise ValueError."""
    cast = (lambda c: Fraction(float(c))) if exact else float
    bindings = {v: Polynomial.from_coeffs([cast(c) for c in cs], "t") for v, cs in segment.coeffs.items()}
    fk = forward_kinematics_rational(chain, WORLD, body.link, point)
    comps = [substitute(c.to_exact() if exact else c, bindings) for c in fk.components]
    g = comps[0].denominator
    if any(c.denominator != g for c in comps[1:]):
        raise ValueError("forward kinematics components do not share a denominator")
    expected = _expected_denominator(chain, body.link, bindings)
    if exact and g != expected:
        raise ValueError("forward kinematics denominator is not the product of (1 + tau^2) factors")
    if not exact:
        gc = np.asarray(univariate_coeff_vector(g, "t"), float)
        ec = np.asarray(univariate_coeff_vector(expected, "t"), float)
        if gc.size != ec.size or not np.allclose(gc, ec, rtol=1e-12, atol=1e-12):
            raise ValueError("forward kinematics denominator is not the product of (1 + tau^2) factors")
    f = [c.numerator for c in comps]
    if exact:
        a_polys = [p.to_exact() for p in a_polys]
        b_poly = b_poly.to_exact()
    s = Polynomial.constant(sign)
    h = s * (a_polys[0] * f[0] + a_polys[1] * f[1] + a_polys[2] * f[2] + b_poly * g) - g
    if body.kind == "polytope":
        return [[h]]
    r = Polynomial.constant(Fraction(float(body.radius)) if exact else float(body.radius))
    Z = Polynomial()
    off = [r * g * a_polys[w] for w in range(3)]
    return [[h if i == j else Z for j in range(3)] + [off[i]] for i in range(3)] + [off + [h]]


def verify_certificate(cert: Certificate, scene, segment: PlanSegment, *, exact: bool = False) -> CheckReport:
    """Independently re-derive and check every condition claimed by ``cert``."""
    diag: list[str] = []

    def reject(msg):
        return CheckReport(REJECTED, [], [msg])

    d = cert.degree
    a = np.asarray(cert.a, dtype=float)
    b = np.asarray(cert.b, dtype=float)
    if d < 0 or a.shape != (3, d + 1) or b.shape != (d + 1,):
        return reject("hyperplane coefficient shapes do not match its degree")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return reject("hyperplane coefficients are not finite")
    ia, ib = cert.pair
    nb = len(scene.bodies)
    if not (0 <= ia < nb and 0 <= ib < nb) or ia == ib:
        return reject("certificate names bodies that are not in the scene")
    try:
        for v in scene.chain.variables:
            segment.coeffs[v]
    except KeyError as exc:
        return reject(f"segment does not bind {exc}")

    expected = {}
    for side, idx in (("A", ia), ("B", ib)):
        body = scene.bodies[idx]
        if body.kind == "polytope":
            for k in range(len(body.vertices)):
                expected[(side, idx, k)] = "vertex"
        elif body.kind == "sphere":
            expected[(side, idx, None)] = "sphere"
        else:
            return reject(f"unsupported body kind {body.kind!r}")
    seen = {}
    for c in cert.constraints:
        key = (c.side, c.body, c.point)
        if key in seen:
            return reject(f"duplicate condition {key}")
        seen[key] = c
    if set(seen) != set(expected):
        missing = sorted(map(str, set(expected) - set(seen)))
        extra = sorted(map(str, set(seen) - set(expected)))
        return reject(f"condition set mismatch (missing {missing}, unexpected {extra})")

    a_polys = [Polynomial.from_coeffs([float(c) for c in row], "t") for row in a]
    b_poly = Polynomial.from_coeffs([float(c) for c in b], "t")
    checks = []
    ok = True
    for key in sorted(expected, key=lambda k: (k[0], k[1], -1 if k[2] is None else k[2])):
        side, idx, k = key
        c: ConstraintCertificate = seen[key]
        body = scene.bodies[idx]
        label = f"{side}:{scene.body_name(idx)}" + ("" if k is None else f":v{k}")
        size = 1 if body.kind == "polytope" else 4
        n = d + _path_degree_bound(scene.chain, body.link, segment)
        if c.kind != expected[key] or c.size != size or c.target_degree != n:
            chk = ConstraintCheck(label, False, reason=f"structure mismatch (kind {c.kind}, size {c.size}, "
                                                         f"degree {c.target_degree}; expected {expected[key]}, "
                                                         f"{size}, {n})")
        else:
            point = body.vertices[k] if k is not None else body.center
            try:
                M = _rebuild_condition(scene.chain, body, point, segment, a_polys, b_poly,
                                       1 if side == "A" else -1, exact)
            except ValueError as exc:
                chk = ConstraintCheck(label, False, reason=str(exc))
            else:
                chk = check_decomposition(M, n, c.gram_lambda, c.gram_nu, c.gamma, exact=exact, label=label)
        checks.append(chk)
        ok = ok and chk.ok
        if not chk.ok:
            diag.append(f"{label}: {chk.reason}")
    return CheckReport(VERIFIED if ok else REJECTED, checks, diag)


# -- falsification ----------------------------------------------------------------


@dataclass
class CollisionFound:
    segment: int
    t: float
    pair_index: int
    pair: tuple[int, int]
    configuration: dict
    min_distance: float

    outcome = "CollisionFound"

    def to_dict(self) -> dict:
        return {"outcome": self.outcome, "segment": self.segment, "t": self.t, "pair_index": self.pair_index,
                "pair": list(self.pair), "configuration": dict(self.configuration),
                "min_distance": self.min_distance}


@dataclass
class NoneFound:
    samples: int

    outcome = "NoneFound"

    def to_dict(self) -> dict:
        return {"outcome": self.outcome, "samples": self.samples}


def sample_falsify(plan: MotionPlan, scene, n: int = 1000, segments: Sequence[int] | None = None):
    """Scan ``n`` uniform parameters per segment for a collision of any pair.

    The scan is by segment, then by ``t``, then by pair index; the first hit
    is returned.
    """
    n = int(n)
    if n < 2:
        raise ValueError("need at least two samples per segment")
    t = np.linspace(0.0, 1.0, n)
    segs = plan.unit_segments()
    todo = range(len(segs)) if segments is None else segments
    for s_idx in todo:
        seg = segs[s_idx]
        if not scene.pairs:
            continue
        config = seg.evaluate(t)
        T = numeric_link_transforms(scene.chain, config)
        best = None
        for p_idx, pair in enumerate(scene.pairs):
            A, B = scene.bodies[pair.a], scene.bodies[pair.b]
            pa = numeric_point_positions(T, A.link, A.points)
            pb = numeric_point_positions(T, B.link, B.points)
            limit = n if best is None else best[0] + 1
            dist = batch_min_distance(A, pa[:limit], B, pb[:limit], stop_at_first_collision=True)
            hits = np.flatnonzero(dist <= 0)
            if hits.size and (best is None or hits[0] < best[0]):
                best = (int(hits[0]), p_idx, float(dist[hits[0]]))
        if best is not None:
            i, p_idx, dmin = best
            pair = scene.pairs[p_idx]
            return CollisionFound(int(s_idx), float(t[i]), p_idx, (pair.a, pair.b),
                                  {v: float(config[v][i]) for v in config}, dmin)
    return NoneFound(n * len(todo))


def placed_distance(scene, segment: PlanSegment, pair_index: int, t) -> np.ndarray:
    """Oracle separation of one pair at parameter values ``t`` (exact distance, no prefilter)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    T = numeric_link_transforms(scene.chain, segment.evaluate(t))
    pair = scene.pairs[pair_index]
    A, B = scene.bodies[pair.a], scene.bodies[pair.b]
    pa = numeric_point_positions(T, A.link, A.points)
    pb = numeric_point_positions(T, B.link, B.points)
    return np.array([min_distance(A.placed(pa[i]), B.placed(pb[i])) for i in range(t.size)])


# -- plan certification -----------------------------------------------------------


@dataclass
class CellResult:
    segment: int
    pair_index: int
    pair: tuple[int, int]
    verdict: str
    solve_status: str
    check: CheckReport | None = None
    certificate: Certificate | None = None
    timings: dict = field(default_factory=dict)
    message: str = ""
    hint: str = ""

    def to_dict(self) -> dict:
        return {"segment": self.segment, "pair_index": self.pair_index, "pair": list(self.pair),
                "verdict": self.verdict, "solve_status": self.solve_status, "message": self.message,
                "hint": self.hint, "timings": dict(self.timings),
                "check": None if self.check is None else self.check.to_dict()}


@dataclass
class PlanReport:
    verdict: str
    cells: list[CellResult]
    n_segments: int
    n_pairs: int
    degree: int

    @property
    def failing(self) -> list[CellResult]:
        return [c for c in self.cells if c.verdict != SAFE]

    def to_dict(self) -> dict:
        solve = [c.timings.get("solve", 0.0) for c in self.cells]
        return {"verdict": self.verdict, "segments": self.n_segments, "pairs": self.n_pairs, "degree": self.degree,
                "cells": len(self.cells), "safe_cells": sum(c.verdict == SAFE for c in self.cells),
                "nsafe_cells": sum(c.verdict != SAFE for c in self.cells),
                "solver_time_total": float(sum(solve)), "solver_time_max": float(max(solve, default=0.0)),
                "failing": [(c.segment, c.pair_index) for c in self.failing],
                "cell_results": [c.to_dict() for c in self.cells]}


def certify_cell(scene, segment: PlanSegment, segment_index: int, pair_index: int, degree: int = 1, *,
                 exact_verify: bool = False, solver_options: SolverOptions | None = None,
                 slack_floor: float = GAMMA_MIN) -> CellResult:
    """Build, solve and independently verify one (segment, pair) cell."""
    pair = scene.pairs[pair_index]
    t0 = time.perf_counter()
    prog = assemble_pair_program(pair, segment, scene, degree, pair_index=pair_index, segment_index=segment_index,
                                 slack_floor=slack_floor)
    t1 = time.perf_counter()
    out = solve_feasibility(prog.problem, solver_options or SolverOptions.from_env())
    t2 = time.perf_counter()
    timings = {"build": t1 - t0, "solve": t2 - t1}
    key = (pair.a, pair.b)
    if not out.feasible:
        hint = f"no degree-{degree} certificate found; a higher hyperplane degree may certify this cell"
        return CellResult(segment_index, pair_index, key, NSAFE, out.status, None, None, timings, out.message, hint)
    cert = prog.certificate(out.solution)
    rep = verify_certificate(cert, scene, segment, exact=exact_verify)
    timings["verify"] = time.perf_counter() - t2
    verdict = SAFE if rep.verified else NSAFE
    return CellResult(segment_index, pair_index, key, verdict, out.status, rep, cert, timings,
                      "" if rep.verified else "; ".join(rep.diagnostics))


_WORKER_SCENE = None


def _init_worker(scene):
    global _WORKER_SCENE
    _WORKER_SCENE = scene


def _worker_cell(args):
    segment, s_idx, p_idx, degree, exact, opts, floor = args
    return certify_cell(_WORKER_SCENE, segment, s_idx, p_idx, degree, exact_verify=exact, solver_options=opts,
                        slack_floor=floor)


def _skipped(s_idx, p_idx, scene) -> CellResult:
    pair = scene.pairs[p_idx]
    return CellResult(s_idx, p_idx, (pair.a, pair.b), NSAFE, "Skipped", message="skipped after an earlier failure "
                                                                                  "in the same segment")


def certify_plan(plan: MotionPlan, scene, degree: int = 1, *, jobs: int = 1, early_stop: bool = False,
                 exact_verify: bool = False, solver_options: SolverOptions | None = None,
                 slack_floor: float = GAMMA_MIN) -> PlanReport:
    """Certify every (segment, pair) cell; SAFE only if all cells are solved and verified."""
    if degree < 0:
        raise ValueError("hyperplane degree must be non-negative")
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    segs = plan.unit_segments()
    opts = solver_options or SolverOptions.from_env()
    cells = [(s, p) for s in range(len(segs)) for p in range(len(scene.pairs))]
    results: dict[tuple[int, int], CellResult] = {}
    failed_segments = set()
    if jobs == 1 or len(cells) <= 1:
        for s, p in cells:
            if early_stop and s in failed_segments:
                results[(s, p)] = _skipped(s, p, scene)
                continue
            r = certify_cell(scene, segs[s], s, p, degree, exact_verify=exact_verify, solver_options=opts,
                             slack_floor=slack_floor)
            results[(s, p)] = r
            if r.verdict != SAFE:
                failed_segments.add(s)
    else:
        workers = max(1, min(jobs, len(cells)))
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(scene,)) as pool:
            futures = {pool.submit(_worker_cell, (segs[s], s, p, degree, exact_verify, opts, slack_floor)): (s, p)
                       for s, p in cells}
            for fut, (s, p) in futures.items():
                if early_stop and s in failed_segments and fut.cancel():
                    results[(s, p)] = _skipped(s, p, scene)
                    continue
                r = fut.result()
                results[(s, p)] = r
                if r.verdict != SAFE:
                    failed_segments.add(s)
    ordered = [results[c] for c in cells]
    verdict = SAFE if all(c.verdict == SAFE for c in ordered) else NSAFE
    return PlanReport(verdict, ordered, len(segs), len(scene.pairs), degree)
