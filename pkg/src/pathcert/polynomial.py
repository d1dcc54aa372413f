"""Sparse multivariate polynomials and positive-denominator rational functions.

Coefficients are plain Python numbers. Floats are used on the builder/solver
path; passing :class:`fractions.Fraction` coefficients (see
:meth:`Polynomial.to_exact`) gives exact arithmetic for the checker.

Monomial ordering is graded lexicographic: monomials are sorted first by total
degree, then lexicographically (descending exponents) over the variable order
supplied by the caller. For two variables ``x, y`` and degree 2 this gives
``1, x, y, x^2, x*y, y^2``.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Monomial",
    "Polynomial",
    "RationalFunction",
    "PolyMatrix",
    "EvaluationError",
    "monomial_basis",
    "poly_add",
    "poly_mul",
    "substitute",
    "evaluate",
    "univariate_coeff_vector",
]


class EvaluationError(ArithmeticError):
    """Raised when a rational function is evaluated at a pole."""


class Monomial(tuple):
    """Product of variables, stored as sorted ``(variable, exponent)`` pairs.

    Zero exponents are never stored, so ``Monomial()`` is the constant 1.
    """

    __slots__ = ()

    def __new__(cls, exponents: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = exponents.items() if isinstance(exponents, Mapping) else exponents
        merged: dict[str, int] = {}
        for var, exp in items:
            if exp < 0:
                raise ValueError(f"negative exponent for {var!r}")
            if exp:
                merged[var] = merged.get(var, 0) + int(exp)
        return super().__new__(cls, tuple(sorted(merged.items())))

    @classmethod
    def _raw(cls, pairs: tuple) -> "Monomial":
        return tuple.__new__(cls, pairs)

    @property
    def degree(self) -> int:
        return sum(e for _, e in self)

    @property
    def exponents(self) -> dict[str, int]:
        return dict(self)

    def exponent(self, var: str) -> int:
        for v, e in self:
            if v == var:
                return e
        return 0

    def variables(self) -> frozenset[str]:
        return frozenset(v for v, _ in self)

    def __mul__(self, other: "Monomial") -> "Monomial":  # type: ignore[override]
        if not self:
            return other
        if not other:
            return self
        merged = dict(self)
        for v, e in other:
            merged[v] = merged.get(v, 0) + e
        return Monomial._raw(tuple(sorted(merged.items())))

    def __repr__(self) -> str:
        if not self:
            return "1"
        return "*".join(v if e == 1 else f"{v}^{e}" for v, e in self)


ONE = Monomial()


def monomial_basis(var_ids: Sequence[str], d: int) -> list[Monomial]:
    """All monomials in ``var_ids`` of total degree at most ``d``.

    Returned in graded lexicographic order; the list has ``C(m + d, d)``
    entries for ``m`` variables.
    """
    if d < 0:
        raise ValueError("degree must be non-negative")
    basis = [ONE]
    for k in range(1, d + 1):
        for combo in itertools.combinations_with_replacement(var_ids, k):
            counts: dict[str, int] = {}
            for v in combo:
                counts[v] = counts.get(v, 0) + 1
            basis.append(Monomial(counts))
    return basis


def _is_zero(c) -> bool:
    return c == 0


class Polynomial:
    """Immutable sparse polynomial ``{Monomial: coefficient}``."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Number] | None = None):
        clean: dict[Monomial, Number] = {}
        if terms:
            for mono, coef in terms.items():
                if not isinstance(mono, Monomial):
                    mono = Monomial(mono)
                if not _is_zero(coef):
                    clean[mono] = clean.get(mono, 0) + coef
            clean = {m: c for m, c in clean.items() if not _is_zero(c)}
        self._terms = clean
        self._hash = None

    @classmethod
    def _wrap(cls, terms: dict) -> "Polynomial":
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value: Number) -> "Polynomial":
        return cls({ONE: value})

    @classmethod
    def variable(cls, var: str, power: int = 1) -> "Polynomial":
        return cls({Monomial({var: power}): 1})

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[Number], var: str) -> "Polynomial":
        """Univariate polynomial from ascending-degree coefficients."""
        terms = {}
        for k, c in enumerate(coeffs):
            c = c.item() if isinstance(c, np.generic) else c
            if not _is_zero(c):
                terms[Monomial({var: k}) if k else ONE] = c
        return cls._wrap(terms)

    # -- inspection ---------------------------------------------------
    @property
    def terms(self) -> dict[Monomial, Number]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, mono: Monomial | Mapping[str, int]) -> Number:
        if not isinstance(mono, Monomial):
            mono = Monomial(mono)
        return self._terms.get(mono, 0)

    def is_zero(self) -> bool:
        return not self._terms

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for m in self._terms:
            out.update(v for v, _ in m)
        return frozenset(out)

    @property
    def total_degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return max((m.degree for m in self._terms), default=-1)

    def degree(self, var: str | None = None) -> int:
        """Degree in ``var`` (total degree when ``var`` is None); ``-1`` for zero."""
        if var is None:
            return self.total_degree
        if not self._terms:
            return -1
        return max(m.exponent(var) for m in self._terms)

    def is_constant(self) -> bool:
        return all(not m for m in self._terms)

    def constant_term(self) -> Number:
        return self._terms.get(ONE, 0)

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (Number, np.generic)):
            return Polynomial.constant(other.item() if isinstance(other, np.generic) else other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self._terms)
        for m, c in other._terms.items():
            v = out.get(m, 0) + c
            if _is_zero(v):
                out.pop(m, None)
            else:
                out[m] = v
        return Polynomial._wrap(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._wrap({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (Number, np.generic)) and not isinstance(other, Polynomial):
            s = other.item() if isinstance(other, np.generic) else other
            if _is_zero(s):
                return Polynomial()
            return Polynomial._wrap({m: c * s for m, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out: dict[Monomial, Number] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = m1 * m2
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial._wrap({m: c for m, c in out.items() if not _is_zero(c)})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (Number, np.generic)):
            other = Polynomial.constant(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def map_coeffs(self, fn) -> "Polynomial":
        return Polynomial({m: fn(c) for m, c in self._terms.items()})

    def to_exact(self) -> "Polynomial":
        """Copy with every coefficient converted exactly to a Fraction."""
        return self.map_coeffs(_to_fraction)

    def to_float(self) -> "Polynomial":
        return self.map_coeffs(float)

    # -- evaluation / composition -------------------------------------
    def __call__(self, point: Mapping[str, Number]):
        return evaluate(self, point)

    def substitute(self, bindings: Mapping[str, "Polynomial"]) -> "Polynomial":
        """Replace variables by polynomials; unbound variables stay free."""
        for v, q in bindings.items():
            if isinstance(q, RationalFunction):
                raise TypeError(f"binding for {v!r} is rational; only polynomial bindings are allowed")
        binds = {v: (q if isinstance(q, Polynomial) else Polynomial.constant(q)) for v, q in bindings.items()}
        power_cache: dict[tuple[str, int], Polynomial] = {}

        def power(v: str, e: int) -> Polynomial:
            key = (v, e)
            if key not in power_cache:
                power_cache[key] = binds[v] if e == 1 else power(v, e - 1) * binds[v]
            return power_cache[key]

        out = Polynomial()
        for mono, coef in self._terms.items():
            term = Polynomial.constant(coef)
            free = []
            for v, e in mono:
                if v in binds:
                    term = term * power(v, e)
                else:
                    free.append((v, e))
            if free:
                term = term * Polynomial({Monomial(free): 1})
            out = out + term
        return out

    def coeff_vector(self, var: str) -> list:
        return univariate_coeff_vector(self, var)

    def derivative(self, var: str) -> "Polynomial":
        out = {}
        for m, c in self._terms.items():
            e = m.exponent(var)
            if e:
                rest = [(v, k - 1 if v == var else k) for v, k in m]
                out[Monomial(rest)] = c * e
        return Polynomial(out)

    def __repr__(self) -> str:
        if not self._terms:
            return "Polynomial(0)"
        parts = [f"{c!r}*{m!r}" if m else repr(c) for m, c in sorted(self._terms.items(), key=lambda kv: (kv[0].degree, kv[0]))]
        return "Polynomial(" + " + ".join(parts) + ")"


def _to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, np.generic):
        c = c.item()
    return Fraction(c)


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


class RationalFunction:
    """``numerator / denominator`` with no cancellation.

    ``denominator_positive`` records that the denominator is known to be
    positive on its whole domain (products of ``1 + tau^2`` factors and
    positive constants); it survives sums, products and polynomial
    substitution.
    """

    __slots__ = ("numerator", "denominator", "denominator_positive")

    def __init__(self, numerator, denominator=1, denominator_positive: bool | None = None):
        num = numerator if isinstance(numerator, Polynomial) else Polynomial.constant(numerator)
        den = denominator if isinstance(denominator, Polynomial) else Polynomial.constant(denominator)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if denominator_positive is None:
            denominator_positive = den.is_constant() and den.constant_term() > 0
        self.numerator = num
        self.denominator = den
        self.denominator_positive = bool(denominator_positive)

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "RationalFunction":
        return cls(p, Polynomial.constant(1), True)

    def _coerce(self, other):
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, Polynomial):
            return RationalFunction.from_polynomial(other)
        if isinstance(other, (Number, np.generic)):
            return RationalFunction.from_polynomial(Polynomial.constant(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        pos = self.denominator_positive and other.denominator_positive
        if self.denominator == other.denominator:
            return RationalFunction(self.numerator + other.numerator, self.denominator, pos)
        return RationalFunction(
            self.numerator * other.denominator + other.numerator * self.denominator,
            self.denominator * other.denominator,
            pos,
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.numerator, self.denominator, self.denominator_positive)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalFunction(
            self.numerator * other.numerator,
            self.denominator * other.denominator,
            self.denominator_positive and other.denominator_positive,
        )

    __rmul__ = __mul__

    def variables(self) -> frozenset[str]:
        return self.numerator.variables() | self.denominator.variables()

    def degree(self, var: str) -> tuple[int, int]:
        """(numerator degree, denominator degree) in ``var``."""
        return self.numerator.degree(var), self.denominator.degree(var)

    def substitute(self, bindings: Mapping[str, Polynomial]) -> "RationalFunction":
        return RationalFunction(
            self.numerator.substitute(bindings),
            self.denominator.substitute(bindings),
            self.denominator_positive,
        )

    def equivalent(self, other: "RationalFunction") -> bool:
        """Exact cross-multiplied equality ``n1 * d2 == n2 * d1``."""
        other = self._coerce(other)
        return self.numerator * other.denominator == other.numerator * self.denominator

    def to_exact(self) -> "RationalFunction":
        return RationalFunction(self.numerator.to_exact(), self.denominator.to_exact(), self.denominator_positive)

    def __call__(self, point):
        return evaluate(self, point)

    def __repr__(self) -> str:
        return f"RationalFunction({self.numerator!r} / {self.denominator!r})"


def substitute(p_or_rf, bindings: Mapping[str, Polynomial]) -> RationalFunction:
    """Compose ``p_or_rf`` with polynomial ``bindings``.

    Raises TypeError if any binding is itself a rational function.
    """
    rf = p_or_rf if isinstance(p_or_rf, RationalFunction) else RationalFunction.from_polynomial(p_or_rf)
    return rf.substitute(bindings)


def _eval_poly(p: Polynomial, point: Mapping[str, Number]):
    missing = p.variables() - set(point)
    if missing:
        raise KeyError(f"unbound variables: {sorted(missing)}")
    total = 0
    for mono, coef in p.items():
        val = coef
        for v, e in mono:
            val = val * point[v] ** e
        total = total + val
    return total


def evaluate(p_or_rf, point: Mapping[str, Number]):
    """Evaluate a Polynomial or RationalFunction at ``point``."""
    if isinstance(p_or_rf, Polynomial):
        return _eval_poly(p_or_rf, point)
    num = _eval_poly(p_or_rf.numerator, point)
    den = _eval_poly(p_or_rf.denominator, point)
    if den == 0:
        raise EvaluationError("denominator vanishes at evaluation point")
    if isinstance(num, Fraction) or isinstance(den, Fraction):
        return Fraction(num) / Fraction(den)
    return num / den


def univariate_coeff_vector(p: Polynomial, var: str) -> list:
    """Dense ascending coefficients of a polynomial in ``var`` alone."""
    extra = p.variables() - {var}
    if extra:
        raise ValueError(f"polynomial is not univariate in {var!r}: also has {sorted(extra)}")
    deg = max(p.degree(var), 0)
    out = [0] * (deg + 1)
    for mono, coef in p.items():
        out[mono.exponent(var)] = coef
    return out


class PolyMatrix:
    """Rectangular grid of polynomials, optionally flagged symmetric."""

    __slots__ = ("entries", "rows", "cols", "symmetric")

    def __init__(self, entries: Sequence[Sequence[Polynomial]], symmetric: bool = False):
        grid = tuple(tuple(e if isinstance(e, Polynomial) else Polynomial.constant(e) for e in row) for row in entries)
        self.rows = len(grid)
        self.cols = len(grid[0]) if grid else 0
        if any(len(r) != self.cols for r in grid):
            raise ValueError("ragged matrix")
        if symmetric:
            if self.rows != self.cols:
                raise ValueError("symmetric matrix must be square")
            for i in range(self.rows):
                for j in range(i + 1, self.cols):
                    if grid[i][j] != grid[j][i]:
                        raise ValueError(f"entries ({i},{j}) and ({j},{i}) differ")
        self.entries = grid
        self.symmetric = symmetric

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def degree(self, var: str | None = None) -> int:
        return max((e.degree(var) for row in self.entries for e in row), default=-1)

    def evaluate(self, point) -> np.ndarray:
        return np.array([[float(evaluate(e, point)) for e in row] for row in self.entries])

    def quadratic_form(self, y_vars: Sequence[str]) -> Polynomial:
        """Scalarization ``y^T P y`` with the given multiplier variable names."""
        if len(y_vars) != self.rows or self.rows != self.cols:
            raise ValueError("dimension mismatch")
        out = Polynomial()
        for i in range(self.rows):
            for j in range(self.cols):
                if not self.entries[i][j].is_zero():
                    out = out + self.entries[i][j] * Polynomial({Monomial({y_vars[i]: 1}) * Monomial({y_vars[j]: 1}): 1})
        return out


def binomial_count(m: int, d: int) -> int:
    return math.comb(m + d, d)
