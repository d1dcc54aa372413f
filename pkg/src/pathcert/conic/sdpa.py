"""Sparse SDPA (``.dat-s``) export and import.

SDPA's dual form ``max F0 . Y  s.t.  Fi . Y = ci,  Y psd`` carries our
standard form directly: ``Y`` is the block-diagonal variable, ``Fi`` the
constraint matrices, ``ci`` the right-hand sides and ``F0 = -C``. Non-negative
scalars go into one diagonal (LP) block; each free scalar is split into a
difference of two entries of that block. A leading comment line records the
split so :func:`import_standard` can undo it.
"""

from __future__ import annotations

import re

import numpy as np

from .problem import SdpProblem

__all__ = ["export_standard", "import_standard", "FORMAT_TAG"]

FORMAT_TAG = "pathcert-sdpa"
FORMAT_VERSION = 1


def _num(v: float) -> str:
    return repr(float(v))


def export_standard(problem: SdpProblem) -> str:
    """Deterministic SDPA sparse text for ``problem``."""
    p, l = problem.n_free, problem.n_nonneg
    lp = l + 2 * p
    struct = [str(n) for n in problem.psd_sizes]
    if lp:
        struct.append(str(-lp))
    lp_block = len(problem.psd_sizes) + 1
    lines = [f'"{FORMAT_TAG} {FORMAT_VERSION} free={p} nonneg={l}',
             str(problem.n_rows), str(len(struct)), " ".join(struct), " ".join(_num(c) for c in problem.rhs)]
    entries = []
    # objective: F0 = -C
    for k, v in enumerate(problem.obj_nonneg):
        if v:
            entries.append((0, lp_block, k + 1, k + 1, -v))
    for k, v in enumerate(problem.obj_free):
        if v:
            entries.append((0, lp_block, l + k + 1, l + k + 1, -v))
            entries.append((0, lp_block, l + p + k + 1, l + p + k + 1, v))
    for b, i, j, v in zip(*problem.obj_psd):
        entries.append((0, int(b) + 1, int(i) + 1, int(j) + 1, -v))
    rows, blocks, ii, jj, vals = problem.psd_entries
    for r, b, i, j, v in zip(rows, blocks, ii, jj, vals):
        entries.append((int(r) + 1, int(b) + 1, int(i) + 1, int(j) + 1, v))
    for r, c, v in zip(*problem.nonneg_entries):
        entries.append((int(r) + 1, lp_block, int(c) + 1, int(c) + 1, v))
    for r, c, v in zip(*problem.free_entries):
        entries.append((int(r) + 1, lp_block, l + int(c) + 1, l + int(c) + 1, v))
        entries.append((int(r) + 1, lp_block, l + p + int(c) + 1, l + p + int(c) + 1, -v))
    entries.sort(key=lambda e: e[:4])
    lines.extend(f"{r} {b} {i} {j} {_num(v)}" for r, b, i, j, v in entries)
    return "\n".join(lines) + "\n"


_HEADER = re.compile(rf"{FORMAT_TAG}\s+(\d+)\s+free=(\d+)\s+nonneg=(\d+)")


def import_standard(text: str) -> SdpProblem:
    """Parse SDPA sparse text; undoes the free-variable split when the header is present."""
    lines = text.splitlines()
    p = l_hdr = None
    body = []
    for line in lines:
        s = line.strip()
        if not s:
            continue
        if s[0] in "\"*" and not body:
            m = _HEADER.search(s)
            if m:
                p, l_hdr = int(m.group(2)), int(m.group(3))
            continue
        body.append(s)
    if len(body) < 2:
        raise ValueError("truncated SDPA document")

    def nums(s):
        return [x for x in re.split(r"[\s,{}()]+", s) if x]

    m = int(nums(body[0])[0])
    nblocks = int(nums(body[1])[0])
    struct = [int(x) for x in nums(body[2])] if nblocks else []
    idx = 3 if nblocks else 2
    if m:
        rhs = [float(x) for x in nums(body[idx])]
        idx += 1
    else:
        rhs = []
        if idx < len(body) and not nums(body[idx]):
            idx += 1
    if len(struct) != nblocks or len(rhs) != m:
        raise ValueError("inconsistent SDPA header")
    psd_blocks = [k for k, n in enumerate(struct) if n > 0]
    lp_blocks = [k for k, n in enumerate(struct) if n < 0]
    if len(lp_blocks) > 1:
        raise ValueError("at most one diagonal block is supported")
    lp_size = -struct[lp_blocks[0]] if lp_blocks else 0
    if p is None:
        p, l = 0, lp_size
    else:
        l = l_hdr
        if l + 2 * p != lp_size:
            raise ValueError("header free/nonneg counts disagree with block structure")
    psd_index = {k: n for n, k in enumerate(psd_blocks)}
    psd_e = ([], [], [], [], [])
    nn_e = ([], [], [])
    fr_e = ([], [], [])
    fr_minus = {}
    obj_l = np.zeros(l)
    obj_f = np.zeros(p)
    obj_p = ([], [], [], [])
    for s in body[idx:]:
        tok = nums(s)
        r, b, i, j = (int(x) for x in tok[:4])
        v = float(tok[4])
        b -= 1
        i -= 1
        j -= 1
        if b in psd_index:
            if r == 0:
                for lst, x in zip(obj_p, (psd_index[b], i, j, -v)):
                    lst.append(x)
            else:
                for lst, x in zip(psd_e, (r - 1, psd_index[b], i, j, v)):
                    lst.append(x)
            continue
        if i != j:
            raise ValueError("off-diagonal entry in diagonal block")
        if i < l:
            if r == 0:
                obj_l[i] -= v
            else:
                for lst, x in zip(nn_e, (r - 1, i, v)):
                    lst.append(x)
        elif i < l + p:
            if r == 0:
                obj_f[i - l] -= v
            else:
                for lst, x in zip(fr_e, (r - 1, i - l, v)):
                    lst.append(x)
        else:
            fr_minus[(r, i - l - p)] = fr_minus.get((r, i - l - p), 0.0) + v
    plus = {}
    for r, c, v in zip(*fr_e):
        plus[(r + 1, c)] = plus.get((r + 1, c), 0.0) + v
    for c, v in enumerate(obj_f):
        if v:
            plus[(0, c)] = plus.get((0, c), 0.0) - v
    for key, v in fr_minus.items():
        if plus.get(key, 0.0) != -v:
            raise ValueError("free-variable split halves disagree")
    return SdpProblem(p, l, tuple(struct[k] for k in psd_blocks), np.asarray(rhs), fr_e, nn_e, psd_e,
                      obj_free=obj_f, obj_nonneg=obj_l, obj_psd=obj_p)
