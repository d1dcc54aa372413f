"""Separating-hyperplane programs for one collision pair over one plan segment.

For a pair of convex bodies A and B moving along a segment ``rho(t)``,
``t in [0, 1]``, we look for a hyperplane ``a(t)^T x + b(t)`` with
polynomial coefficients such that every point of A satisfies
``a^T x + b >= 1`` and every point of B satisfies ``a^T x + b <= -1``.

With rational forward kinematics ``x = f(t) / g(t)`` (``g > 0``) each
requirement clears to a polynomial (or, for spheres, polynomial-matrix)
non-negativity condition on ``[0, 1]`` that is affine in the hyperplane
coefficients. Each such condition is then replaced by an exact
interval decomposition with SOS multipliers

* even degree ``n = 2d``:  ``p = lambda + t (1 - t) nu``, ``deg lambda = 2d``, ``deg nu = 2d - 2``
* odd degree ``n = 2d + 1``: ``p = t lambda + (1 - t) nu``, ``deg lambda = deg nu = 2d``

whose Gram matrices become PSD blocks of a standard-form SDP. Matrix
conditions ``M(t) >= 0`` use the scalarization ``y^T M(t) y`` with
multipliers that are quadratic forms in ``y`` and SOS in ``t``; their Gram
matrices act on the basis ``y_a t^i`` ordered y-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .conic import ProblemBuilder, SdpProblem, SdpSolution
from .geometry import CollisionPair
from .kinematics import WORLD, RationalFK, compose_with_plan, forward_kinematics_rational
from .plan import PlanSegment
from .polynomial import Monomial, PolyMatrix, Polynomial, univariate_coeff_vector

__all__ = [
    "GAMMA_MIN",
    "CERTIFICATE_VERSION",
    "HyperplaneTemplate",
    "IntervalDecompTemplate",
    "decomposition_template",
    "AffinePolyMatrix",
    "build_polytope_side",
    "build_sphere_side",
    "LoweredConstraint",
    "lower_scalar_constraint",
    "lower_matrix_constraint",
    "extract_grams",
    "ConstraintRecord",
    "PairProgram",
    "assemble_pair_program",
    "ConstraintCertificate",
    "Certificate",
]

GAMMA_MIN = 1e-6
CERTIFICATE_VERSION = 1
SIDE_A, SIDE_B = "A", "B"


# -- templates ------------------------------------------------------------------


@dataclass(frozen=True)
class HyperplaneTemplate:
    """Unknown hyperplane ``a(t) = sum_k a_k t^k``, ``b(t) = sum_k b_k t^k`` of degree ``degree``.

    Unknowns are laid out as ``a_x[0..d], a_y[0..d], a_z[0..d], b[0..d]``.
    """

    degree: int

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("hyperplane degree must be non-negative")

    @property
    def n_unknowns(self) -> int:
        return 4 * (self.degree + 1)

    def a_index(self, axis: int, k: int) -> int:
        return axis * (self.degree + 1) + k

    def b_index(self, k: int) -> int:
        return 3 * (self.degree + 1) + k

    def names(self) -> list[str]:
        d = self.degree
        return [f"a{w}_{k}" for w in range(3) for k in range(d + 1)] + [f"b_{k}" for k in range(d + 1)]

    def split(self, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Coefficient arrays ``a`` (3, d+1) and ``b`` (d+1,) from an unknown vector."""
        x = np.asarray(x, dtype=float)
        d1 = self.degree + 1
        return x[: 3 * d1].reshape(3, d1).copy(), x[3 * d1:4 * d1].copy()

    def symbolic(self, var: str = "t") -> tuple[list[Polynomial], Polynomial]:
        """``a(t)``, ``b(t)`` as polynomials in ``var`` and the unknown symbols."""
        names = self.names()
        t = Polynomial.variable(var)
        a = [sum((Polynomial.variable(names[self.a_index(w, k)]) * t ** k for k in range(self.degree + 1)),
                 Polynomial()) for w in range(3)]
        b = sum((Polynomial.variable(names[self.b_index(k)]) * t ** k for k in range(self.degree + 1)), Polynomial())
        return a, b


@dataclass(frozen=True)
class IntervalDecompTemplate:
    """Multiplier layout for non-negativity of a degree-``target_degree`` polynomial on [0, 1].

    ``weight_lambda`` / ``weight_nu`` are ascending coefficient tuples of the
    interval weights; ``nu_degree`` is ``None`` when the ``nu`` term is absent.
    """

    target_degree: int
    parity: str
    lambda_degree: int
    nu_degree: int | None
    weight_lambda: tuple[float, ...]
    weight_nu: tuple[float, ...] | None
    interval: tuple[float, float] = (0.0, 1.0)

    @property
    def lambda_half(self) -> int:
        return self.lambda_degree // 2

    @property
    def nu_half(self) -> int | None:
        return None if self.nu_degree is None else self.nu_degree // 2

    def gram_sizes(self, m: int = 1) -> tuple[int, int]:
        """Sizes of the lambda and nu Gram matrices for an ``m x m`` constraint (0 = absent)."""
        nu = 0 if self.nu_degree is None else m * (self.nu_half + 1)
        return m * (self.lambda_half + 1), nu


_W_ONE = (1.0,)
_W_T = (0.0, 1.0)
_W_1MT = (1.0, -1.0)
_W_T1MT = (0.0, 1.0, -1.0)


def decomposition_template(n: int) -> IntervalDecompTemplate:
    """Template for a polynomial of degree ``n``; parity chosen from ``n``."""
    n = int(n)
    if n < 0:
        raise ValueError("target degree must be non-negative")
    d = n // 2
    if n % 2 == 0:
        tpl = IntervalDecompTemplate(n, "even", 2 * d, 2 * d - 2 if d > 0 else None,
                                     _W_ONE, _W_T1MT if d > 0 else None)
    else:
        tpl = IntervalDecompTemplate(n, "odd", 2 * d, 2 * d, _W_T, _W_1MT)
    # the weighted multipliers must reach the target degree exactly
    assert len(tpl.weight_lambda) - 1 + tpl.lambda_degree == n
    if tpl.nu_degree is not None:
        assert len(tpl.weight_nu) - 1 + tpl.nu_degree == n
    return tpl


# -- affine polynomial matrices ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffinePolyMatrix:
    """Symmetric ``m x m`` univariate polynomial matrix, affine in ``p`` unknowns.

    ``data[a, b, k, 0]`` is the constant part of the ``t^k`` coefficient of
    entry ``(a, b)`` and ``data[a, b, k, 1 + j]`` its coefficient on unknown ``j``.
    """

    data: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.data, dtype=float)
        if D.ndim != 4 or D.shape[0] != D.shape[1] or D.shape[2] < 1 or D.shape[3] < 1:
            raise ValueError("data must have shape (m, m, n+1, 1+p)")
        if not np.array_equal(D, D.transpose(1, 0, 2, 3)):
            raise ValueError("polynomial matrix must be symmetric")
        object.__setattr__(self, "data", D)

    @classmethod
    def constant(cls, coeffs) -> "AffinePolyMatrix":
        """Matrix with no unknowns from coefficients of shape ``(m, m, n+1)`` (or ``(n+1,)`` for 1x1)."""
        c = np.asarray(coeffs, dtype=float)
        if c.ndim == 1:
            c = c[None, None, :]
        return cls(c[..., None])

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def degree(self) -> int:
        """Structural degree (number of stored powers minus one)."""
        return self.data.shape[2] - 1

    @property
    def n_unknowns(self) -> int:
        return self.data.shape[3] - 1

    def evaluate(self, x: Sequence[float] | None = None) -> np.ndarray:
        """Coefficients ``(m, m, n+1)`` after substituting the unknowns ``x``."""
        x = np.zeros(self.n_unknowns) if x is None else np.asarray(x, dtype=float)
        return self.data[..., 0] + self.data[..., 1:] @ x

    def symbolic(self, names: Sequence[str], var: str = "t") -> PolyMatrix:
        """Entries as polynomials in ``var`` and the named unknowns."""
        m = self.size
        rows = []
        for a in range(m):
            row = []
            for b in range(m):
                terms: dict = {}
                for k in range(self.degree + 1):
                    for j in range(self.n_unknowns + 1):
                        c = self.data[a, b, k, j]
                        if c != 0:
                            mono = {var: k} if k else {}
                            if j:
                                mono[names[j - 1]] = 1
                            key = Monomial(mono)
                            terms[key] = terms.get(key, 0.0) + float(c)
                row.append(Polynomial(terms))
            rows.append(row)
        return PolyMatrix(rows, symmetric=True)


def _univariate(p: Polynomial, length: int, var: str) -> np.ndarray:
    c = univariate_coeff_vector(p, var)
    if len(c) > length:
        if any(float(x) != 0.0 for x in c[length:]):
            raise AssertionError("forward kinematics exceeds its structural degree bound")
        c = c[:length]
    out = np.zeros(length)
    out[: len(c)] = [float(x) for x in c]
    return out


def _fk_arrays(fk: RationalFK, var: str = "t") -> tuple[np.ndarray, np.ndarray]:
    """Numerator (3, n+1) and denominator (n+1,) coefficients of a univariate FK."""
    if fk.degree_bound is None:
        n = max(max(c.numerator.degree(var) for c in fk.components), fk.denominator.degree(var), 0)
    else:
        n = fk.degree_bound
    f = np.stack([_univariate(c.numerator, n + 1, var) for c in fk.components])
    g = _univariate(fk.denominator, n + 1, var)
    return f, g


def _halfspace_rows(f: np.ndarray, g: np.ndarray, hp: HyperplaneTemplate, sign: int) -> np.ndarray:
    """``h = sign (a^T f + b g) - g`` as a ``(n_fk + d_h + 1, 1 + p)`` coefficient table."""
    d = hp.degree
    n = f.shape[1] - 1 + d
    out = np.zeros((n + 1, 1 + hp.n_unknowns))
    out[: g.size, 0] = -g
    for k in range(d + 1):
        for w in range(3):
            out[k:k + f.shape[1], 1 + hp.a_index(w, k)] += sign * f[w]
        out[k:k + g.size, 1 + hp.b_index(k)] += sign * g
    return out


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 (side A) or -1 (side B)")
    return sign


def build_polytope_side(fk_vertices: Sequence[RationalFK], hp: HyperplaneTemplate, sign: int,
                        var: str = "t") -> list[AffinePolyMatrix]:
    """One scalar condition per vertex: ``sign (a^T f + b g) - g >= 0`` on [0, 1]."""
    _check_sign(sign)
    out = []
    for fk in fk_vertices:
        f, g = _fk_arrays(fk, var)
        out.append(AffinePolyMatrix(_halfspace_rows(f, g, hp, sign)[None, None]))
    return out


def build_sphere_side(fk_center: RationalFK, radius: float, hp: HyperplaneTemplate, sign: int,
                      var: str = "t") -> AffinePolyMatrix:
    """``[[h I, r g a], [r g a^T, h]] >= 0`` on [0, 1], with ``h`` as for a polytope vertex.

    By a Schur complement this says ``sign (a^T c + b) >= 1 + r |a|`` at the center ``c``.
    """
    _check_sign(sign)
    if not radius >= 0:
        raise ValueError("radius must be non-negative")
    f, g = _fk_arrays(fk_center, var)
    return _sphere_matrix(f, g, radius, hp, sign)


# -- lowering ---------------------------------------------------------------------


@dataclass(frozen=True)
class LoweredConstraint:
    """Where one lowered condition lives inside a :class:`ProblemBuilder`."""

    template: IntervalDecompTemplate
    size: int
    rows: range
    lambda_block: int
    nu_block: int | None
    slack: int | None
    slack_floor: float | None


def _gram_terms(weight: Sequence[float], half: int, a: int, b: int, k: int):
    """Gram entries (upper-triangle convention) matching ``t^k`` of entry ``(a, b)``.

    Yields ``(I, J, v)`` where the row coefficient on ``Q[I, J]`` is ``v``.
    """
    h1 = half + 1
    for u, w in enumerate(weight):
        if w == 0:
            continue
        kk = k - u
        if kk < 0 or kk > 2 * half:
            continue
        lo, hi = max(0, kk - half), min(half, kk)
        for i in range(lo, hi + 1):
            j = kk - i
            if a == b:
                if i <= j:
                    yield a * h1 + i, a * h1 + j, w
            else:
                yield a * h1 + i, b * h1 + j, 0.5 * w


def lower_matrix_constraint(builder: ProblemBuilder, M: AffinePolyMatrix, template: IntervalDecompTemplate,
                            unknowns: Sequence[int] = (), slack_floor: float | None = GAMMA_MIN) -> LoweredConstraint:
    """Add the coefficient-matching equalities for ``M(t) >= 0`` on [0, 1].

    ``unknowns[j]`` is the builder's free-variable index for the matrix's
    unknown ``j``. With ``slack_floor`` set, the identity carries an extra
    ``(slack_floor + s) I`` term with ``s >= 0``.
    """
    if M.degree != template.target_degree:
        raise ValueError(f"template degree {template.target_degree} does not match constraint degree {M.degree}")
    if len(unknowns) != M.n_unknowns:
        raise ValueError("one builder column is needed per unknown")
    m = M.size
    lam_size, nu_size = template.gram_sizes(m)
    lam = builder.add_psd(lam_size)
    nu = builder.add_psd(nu_size) if nu_size else None
    s = builder.add_nonneg(1)[0] if slack_floor is not None else None
    first = len(builder.rhs)
    for a in range(m):
        for b in range(a, m):
            for k in range(M.degree + 1):
                coeffs = M.data[a, b, k]
                rhs = -coeffs[0]
                if a == b and k == 0 and slack_floor is not None:
                    rhs += slack_floor
                row = builder.add_row(rhs)
                for j in np.flatnonzero(coeffs[1:]):
                    builder.free(row, unknowns[j], coeffs[1 + j])
                for I, J, v in _gram_terms(template.weight_lambda, template.lambda_half, a, b, k):
                    builder.psd(row, lam, I, J, -v)
                if nu is not None:
                    for I, J, v in _gram_terms(template.weight_nu, template.nu_half, a, b, k):
                        builder.psd(row, nu, I, J, -v)
                if s is not None and a == b and k == 0:
                    builder.nonneg(row, s, -1.0)
    return LoweredConstraint(template, m, range(first, len(builder.rhs)), lam, nu, s, slack_floor)


def lower_scalar_constraint(builder: ProblemBuilder, c: AffinePolyMatrix, template: IntervalDecompTemplate,
                            unknowns: Sequence[int] = (), slack_floor: float | None = GAMMA_MIN) -> LoweredConstraint:
    """Scalar case of :func:`lower_matrix_constraint`; adds exactly ``deg c + 1`` rows."""
    if c.size != 1:
        raise ValueError("scalar lowering needs a 1x1 constraint")
    return lower_matrix_constraint(builder, c, template, unknowns, slack_floor)


def extract_grams(lowered: LoweredConstraint, solution: SdpSolution):
    """``(Q_lambda, Q_nu or None, gamma)`` for one lowered constraint."""
    Ql = np.array(solution.psd[lowered.lambda_block], dtype=float)
    Qn = None if lowered.nu_block is None else np.array(solution.psd[lowered.nu_block], dtype=float)
    if lowered.slack is None:
        gamma = 0.0
    else:
        gamma = float(lowered.slack_floor + max(float(solution.nonneg[lowered.slack]), 0.0))
    return Ql, Qn, gamma


# -- pair programs ----------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintRecord:
    side: str
    body: int
    point: int | None
    kind: str
    lowered: LoweredConstraint


class _LinkFK:
    """Composed FK numerators of a link frame: ``x(t) = (p + R v) / g`` for body-fixed ``v``."""

    def __init__(self, chain, link: str, segment: PlanSegment):
        fks = [compose_with_plan(forward_kinematics_rational(chain, WORLD, link, pt), segment)
               for pt in ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))]
        arrays = [_fk_arrays(fk) for fk in fks]
        self.p, self.g = arrays[0]
        self.R = np.stack([arr[0] - self.p for arr in arrays[1:]], axis=1)  # (3 rows, 3 cols, n+1)

    def numerators(self, v) -> np.ndarray:
        return self.p + np.einsum("wjk,j->wk", self.R, np.asarray(v, dtype=float))


@dataclass(frozen=True, eq=False)
class PairProgram:
    """SDP for one (pair, segment) cell plus the map back to a certificate."""

    problem: SdpProblem
    hyperplane: HyperplaneTemplate
    unknowns: range
    records: tuple[ConstraintRecord, ...]
    pair: CollisionPair
    pair_index: int = 0
    segment_index: int = 0
    slack_floor: float = GAMMA_MIN
    margin_mode: bool = False

    def certificate(self, solution: SdpSolution) -> "Certificate":
        a, b = self.hyperplane.split(np.asarray(solution.free)[list(self.unknowns)])
        cons = []
        for rec in self.records:
            Ql, Qn, gamma = extract_grams(rec.lowered, solution)
            cons.append(ConstraintCertificate(rec.side, rec.body, rec.point, rec.kind, rec.lowered.size,
                                              rec.lowered.template.target_degree, Ql, Qn, gamma))
        return Certificate((self.pair.a, self.pair.b), self.pair_index, self.segment_index, self.hyperplane.degree,
                           a, b, tuple(cons))


def assemble_pair_program(pair: CollisionPair, segment: PlanSegment, scene, degree: int = 1, *,
                          pair_index: int = 0, segment_index: int = 0, slack_floor: float = GAMMA_MIN,
                          maximize_margin: bool = False) -> PairProgram:
    """Build the separating-hyperplane SDP for ``pair`` over ``segment``.

    ``scene`` supplies the kinematic chain and the bodies the pair indexes.
    ``maximize_margin`` adds the objective ``max sum s`` with each slack capped at 1,
    turning the feasibility problem into a margin report.
    """
    hp = HyperplaneTemplate(degree)
    builder = ProblemBuilder()
    unknowns = builder.add_free(hp.n_unknowns)
    link_cache: dict[str, _LinkFK] = {}
    records = []
    for side, sign, idx in ((SIDE_A, 1, pair.a), (SIDE_B, -1, pair.b)):
        body = scene.bodies[idx]
        if body.link not in link_cache:
            link_cache[body.link] = _LinkFK(scene.chain, body.link, segment)
        lfk = link_cache[body.link]
        if body.kind == "polytope":
            for v_idx, v in enumerate(body.vertices):
                h = _halfspace_rows(lfk.numerators(v), lfk.g, hp, sign)
                M = AffinePolyMatrix(h[None, None])
                low = lower_scalar_constraint(builder, M, decomposition_template(M.degree), unknowns, slack_floor)
                records.append(ConstraintRecord(side, idx, v_idx, "vertex", low))
        elif body.kind == "sphere":
            M = _sphere_matrix(lfk.numerators(body.center), lfk.g, body.radius, hp, sign)
            low = lower_matrix_constraint(builder, M, decomposition_template(M.degree), unknowns, slack_floor)
            records.append(ConstraintRecord(side, idx, None, "sphere", low))
        else:
            raise TypeError(f"unsupported body kind {body.kind!r}")
    if maximize_margin:
        for rec in records:
            s = rec.lowered.slack
            cap = builder.add_nonneg(1)[0]
            row = builder.add_row(1.0)
            builder.nonneg(row, s, 1.0)
            builder.nonneg(row, cap, 1.0)
            builder.obj_nonneg[s] = -1.0
    builder.labels.update(pair=pair.key, segment=segment_index, degree=degree)
    return PairProgram(builder.build(), hp, unknowns, tuple(records), pair, pair_index, segment_index,
                       slack_floor, maximize_margin)


def _sphere_matrix(f, g, radius, hp, sign) -> AffinePolyMatrix:
    h = _halfspace_rows(f, g, hp, sign)
    data = np.zeros((4, 4) + h.shape)
    for w in range(3):
        data[w, w] = h
        for k in range(hp.degree + 1):
            data[w, 3, k:k + g.size, 1 + hp.a_index(w, k)] = radius * g
        data[3, w] = data[w, 3]
    data[3, 3] = h
    return AffinePolyMatrix(data)


# -- certificates -----------------------------------------------------------------


def _matrix_to_list(Q):
    return None if Q is None else [[float(v) for v in row] for row in np.asarray(Q)]


@dataclass(frozen=True, eq=False)
class ConstraintCertificate:
    """Multipliers for one condition of a pair certificate.

    ``point`` is the vertex index for polytope conditions and ``None`` for spheres.
    """

    side: str
    body: int
    point: int | None
    kind: str
    size: int
    target_degree: int
    gram_lambda: np.ndarray
    gram_nu: np.ndarray | None
    gamma: float

    def replace(self, **kw) -> "ConstraintCertificate":
        d = {k: getattr(self, k) for k in ("side", "body", "point", "kind", "size", "target_degree", "gram_lambda",
                                          "gram_nu", "gamma")}
        d.update(kw)
        return ConstraintCertificate(**d)

    def to_dict(self) -> dict:
        tpl = decomposition_template(self.target_degree)
        basis = {"order": "y-major", "y_dim": self.size, "t_degree_lambda": tpl.lambda_half,
                 "t_degree_nu": tpl.nu_half}
        return {"side": self.side, "body": self.body, "point": self.point, "kind": self.kind, "size": self.size,
                "target_degree": self.target_degree, "parity": tpl.parity, "basis": basis,
                "gram_lambda": _matrix_to_list(self.gram_lambda), "gram_nu": _matrix_to_list(self.gram_nu),
                "gamma": float(self.gamma)}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintCertificate":
        Qn = d.get("gram_nu")
        return cls(d["side"], int(d["body"]), None if d.get("point") is None else int(d["point"]), d["kind"],
                   int(d["size"]), int(d["target_degree"]), np.asarray(d["gram_lambda"], dtype=float),
                   None if Qn is None else np.asarray(Qn, dtype=float), float(d["gamma"]))


@dataclass(frozen=True, eq=False)
class Certificate:
    """Hyperplane coefficients and per-condition multipliers for one (pair, segment) cell."""

    pair: tuple[int, int]
    pair_index: int
    segment_index: int
    degree: int
    a: np.ndarray
    b: np.ndarray
    constraints: tuple[ConstraintCertificate, ...] = field(default_factory=tuple)

    def hyperplane(self, var: str = "t") -> tuple[list[Polynomial], Polynomial]:
        return ([Polynomial.from_coeffs([float(c) for c in row], var) for row in np.asarray(self.a)],
                Polynomial.from_coeffs([float(c) for c in self.b], var))

    def with_constraint(self, k: int, cons: ConstraintCertificate) -> "Certificate":
        cs = list(self.constraints)
        cs[k] = cons
        return Certificate(self.pair, self.pair_index, self.segment_index, self.degree, self.a, self.b, tuple(cs))

    def to_dict(self) -> dict:
        return {"format": "pathcert-certificate", "version": CERTIFICATE_VERSION, "pair": list(self.pair),
                "pair_index": self.pair_index, "segment_index": self.segment_index, "degree": self.degree,
                "a": [[float(v) for v in row] for row in np.asarray(self.a)], "b": [float(v) for v in self.b],
                "constraints": [c.to_dict() for c in self.constraints]}

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        if d.get("format") != "pathcert-certificate" or int(d.get("version", -1)) > CERTIFICATE_VERSION:
            raise ValueError("not a supported certificate document")
        return cls(tuple(int(v) for v in d["pair"]), int(d["pair_index"]), int(d["segment_index"]),
                   int(d["degree"]), np.asarray(d["a"], dtype=float).reshape(3, -1), np.asarray(d["b"], dtype=float),
                   tuple(ConstraintCertificate.from_dict(c) for c in d["constraints"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        return cls.from_dict(json.loads(text))
