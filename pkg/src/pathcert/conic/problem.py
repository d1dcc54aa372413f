"""Standard-form semidefinite feasibility problems.

Variables are split into three kinds: free scalars, non-negative scalars and
symmetric PSD blocks. Constraints are linear equalities

    sum_f A_f[r, f] x_f + sum_l A_l[r, l] x_l + sum_k <A_{r,k}, X_k> = b_r

where each ``A_{r,k}`` is symmetric and stored by its upper triangle (SDPA
convention: an off-diagonal entry ``v`` at ``(i, j)`` stands for ``v`` at both
``(i, j)`` and ``(j, i)``, so it contributes ``2 v X_ij``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SdpProblem", "ProblemBuilder", "SdpSolution", "SolveOutcome", "FEASIBLE", "INFEASIBLE", "UNKNOWN"]

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
UNKNOWN = "Unknown"


def _canon_lin(rows, cols, vals):
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if rows.size == 0:
        return rows, cols, vals
    key = np.stack([rows, cols], axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    summed = np.zeros(len(uniq))
    np.add.at(summed, inv.ravel(), vals)
    keep = summed != 0
    return uniq[keep, 0], uniq[keep, 1], summed[keep]


def _canon_psd(rows, blocks, ii, jj, vals):
    rows = np.asarray(rows, dtype=np.int64)
    blocks = np.asarray(blocks, dtype=np.int64)
    ii = np.asarray(ii, dtype=np.int64)
    jj = np.asarray(jj, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if rows.size == 0:
        return rows, blocks, ii, jj, vals
    lo, hi = np.minimum(ii, jj), np.maximum(ii, jj)
    key = np.stack([rows, blocks, lo, hi], axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    summed = np.zeros(len(uniq))
    np.add.at(summed, inv.ravel(), vals)
    keep = summed != 0
    u = uniq[keep]
    return u[:, 0], u[:, 1], u[:, 2], u[:, 3], summed[keep]


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Feasibility (or linear-objective) SDP in canonical sparse form.

    ``objective`` terms use the same layout with row index 0 and are
    *minimized*; an empty objective means pure feasibility.
    """

    n_free: int
    n_nonneg: int
    psd_sizes: tuple[int, ...]
    rhs: np.ndarray
    free_entries: tuple = ((), (), ())
    nonneg_entries: tuple = ((), (), ())
    psd_entries: tuple = ((), (), (), (), ())
    obj_free: np.ndarray | None = None
    obj_nonneg: np.ndarray | None = None
    obj_psd: tuple = ((), (), (), ())
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "psd_sizes", tuple(int(s) for s in self.psd_sizes))
        m = rhs.size
        fr = _canon_lin(*self.free_entries)
        nn = _canon_lin(*self.nonneg_entries)
        ps = _canon_psd(*self.psd_entries)
        for name, (r, c, _), n in (("free", fr, self.n_free), ("nonneg", nn, self.n_nonneg)):
            if r.size and (r.min() < 0 or r.max() >= m or c.min() < 0 or c.max() >= n):
                raise ValueError(f"{name} entry out of range")
        if ps[0].size:
            if ps[0].min() < 0 or ps[0].max() >= m:
                raise ValueError("psd entry row out of range")
            if ps[1].min() < 0 or ps[1].max() >= len(self.psd_sizes):
                raise ValueError("psd entry block out of range")
            sizes = np.asarray(self.psd_sizes)[ps[1]]
            if ps[2].min() < 0 or np.any(ps[3] >= sizes):
                raise ValueError("psd entry index out of range")
        object.__setattr__(self, "free_entries", fr)
        object.__setattr__(self, "nonneg_entries", nn)
        object.__setattr__(self, "psd_entries", ps)
        of = np.zeros(self.n_free) if self.obj_free is None else np.asarray(self.obj_free, dtype=float)
        ol = np.zeros(self.n_nonneg) if self.obj_nonneg is None else np.asarray(self.obj_nonneg, dtype=float)
        object.__setattr__(self, "obj_free", of)
        object.__setattr__(self, "obj_nonneg", ol)
        ob, oi, oj, ov = (np.asarray(a) for a in self.obj_psd)
        z = np.zeros(len(ob), dtype=np.int64)
        _, ob, oi, oj, ov = _canon_psd(z, ob, oi, oj, ov)
        object.__setattr__(self, "obj_psd", (ob, oi, oj, ov))

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    @property
    def has_objective(self) -> bool:
        return bool(np.any(self.obj_free) or np.any(self.obj_nonneg) or len(self.obj_psd[0]))

    # -- dense views ----------------------------------------------------
    def dense_free(self) -> np.ndarray:
        A = np.zeros((self.n_rows, self.n_free))
        r, c, v = self.free_entries
        A[r, c] = v
        return A

    def dense_nonneg(self) -> np.ndarray:
        A = np.zeros((self.n_rows, self.n_nonneg))
        r, c, v = self.nonneg_entries
        A[r, c] = v
        return A

    def psd_blocks(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per block: (row indices touching it, dense symmetric matrices)."""
        rows, blocks, ii, jj, vals = self.psd_entries
        out = []
        for k, n in enumerate(self.psd_sizes):
            sel = blocks == k
            r_k = np.unique(rows[sel])
            mats = np.zeros((len(r_k), n, n))
            pos = np.searchsorted(r_k, rows[sel])
            mats[pos, ii[sel], jj[sel]] = vals[sel]
            mats[pos, jj[sel], ii[sel]] = vals[sel]
            out.append((r_k, mats))
        return out

    def objective_psd_dense(self) -> list[np.ndarray]:
        ob, oi, oj, ov = self.obj_psd
        mats = [np.zeros((n, n)) for n in self.psd_sizes]
        for b, i, j, v in zip(ob, oi, oj, ov):
            mats[b][i, j] = v
            mats[b][j, i] = v
        return mats

    def equality_residual(self, free, nonneg, psd) -> np.ndarray:
        """``A x - b`` for a candidate point, computed straight from the sparse entries."""
        res = -self.rhs.copy()
        r, c, v = self.free_entries
        np.add.at(res, r, v * np.asarray(free, dtype=float)[c] if r.size else 0.0)
        r, c, v = self.nonneg_entries
        np.add.at(res, r, v * np.asarray(nonneg, dtype=float)[c] if r.size else 0.0)
        rows, blocks, ii, jj, vals = self.psd_entries
        for idx in range(rows.size):
            X = psd[blocks[idx]]
            w = 1.0 if ii[idx] == jj[idx] else 2.0
            res[rows[idx]] += w * vals[idx] * X[ii[idx], jj[idx]]
        return res

    def same_as(self, other: "SdpProblem") -> bool:
        """Bitwise equality of canonical forms."""
        if (self.n_free, self.n_nonneg, self.psd_sizes) != (other.n_free, other.n_nonneg, other.psd_sizes):
            return False
        pairs = [
            (self.rhs, other.rhs),
            *zip(self.free_entries, other.free_entries),
            *zip(self.nonneg_entries, other.nonneg_entries),
            *zip(self.psd_entries, other.psd_entries),
            (self.obj_free, other.obj_free),
            (self.obj_nonneg, other.obj_nonneg),
            *zip(self.obj_psd, other.obj_psd),
        ]
        for a, b in pairs:
            a, b = np.asarray(a), np.asarray(b)
            if a.shape != b.shape or a.tobytes() != b.astype(a.dtype).tobytes():
                return False
        return True


class ProblemBuilder:
    """Incremental assembly of an :class:`SdpProblem`."""

    def __init__(self):
        self.n_free = 0
        self.n_nonneg = 0
        self.psd_sizes: list[int] = []
        self.rhs: list[float] = []
        self._free = ([], [], [])
        self._nonneg = ([], [], [])
        self._psd = ([], [], [], [], [])
        self.obj_nonneg: dict[int, float] = {}
        self.labels: dict = {}

    def add_free(self, n: int) -> range:
        start = self.n_free
        self.n_free += n
        return range(start, start + n)

    def add_nonneg(self, n: int = 1) -> range:
        start = self.n_nonneg
        self.n_nonneg += n
        return range(start, start + n)

    def add_psd(self, size: int) -> int:
        self.psd_sizes.append(int(size))
        return len(self.psd_sizes) - 1

    def add_row(self, rhs: float) -> int:
        self.rhs.append(float(rhs))
        return len(self.rhs) - 1

    def free(self, row: int, col: int, val: float):
        if val != 0:
            for lst, x in zip(self._free, (row, col, val)):
                lst.append(x)

    def nonneg(self, row: int, col: int, val: float):
        if val != 0:
            for lst, x in zip(self._nonneg, (row, col, val)):
                lst.append(x)

    def psd(self, row: int, block: int, i: int, j: int, val: float):
        """Add ``val`` to the (symmetric) coefficient matrix entry ``(i, j)``."""
        if val != 0:
            if i > j:
                i, j = j, i
            for lst, x in zip(self._psd, (row, block, i, j, val)):
                lst.append(x)

    def psd_matrix(self, row: int, block: int, mat: np.ndarray):
        """Add the full symmetric matrix ``mat`` as the coefficient of ``block`` in ``row``."""
        iu, ju = np.triu_indices(mat.shape[0])
        vals = mat[iu, ju]
        nz = vals != 0
        for i, j, v in zip(iu[nz], ju[nz], vals[nz]):
            self.psd(row, block, int(i), int(j), float(v))

    def build(self) -> SdpProblem:
        obj_l = None
        if self.obj_nonneg:
            obj_l = np.zeros(self.n_nonneg)
            for k, v in self.obj_nonneg.items():
                obj_l[k] = v
        return SdpProblem(
            self.n_free,
            self.n_nonneg,
            tuple(self.psd_sizes),
            np.asarray(self.rhs, dtype=float),
            self._free,
            self._nonneg,
            self._psd,
            obj_nonneg=obj_l,
            labels=dict(self.labels),
        )


@dataclass(frozen=True, eq=False)
class SdpSolution:
    free: np.ndarray
    nonneg: np.ndarray
    psd: tuple[np.ndarray, ...]
    y: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    """Solver verdict.

    ``solution`` holds the primal point when Feasible and the normalized
    Farkas witness (``y`` with ``b^T y = 1``) when Infeasible.
    """

    status: str
    solution: SdpSolution | None = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    message: str = ""
    solve_time: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE
