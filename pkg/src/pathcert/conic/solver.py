"""Homogeneous self-dual primal-dual interior-point method for small SDPs.

Primal:  min c^T x  s.t.  A x = b,  x in K
Dual:    max b^T y  s.t.  A^T y + s = c,  s in K*

with K = R^p (free) x R^l_+ x S^n1_+ x ... Free variables have a zero dual
slack. The embedding

    A x - b tau = 0,   A^T y + s - c tau = 0,   c^T x - b^T y + kappa = 0

is driven to complementarity with Mehrotra predictor-corrector steps under
Nesterov-Todd scaling. ``tau > 0`` at the limit yields a primal solution,
``kappa > 0`` with ``b^T y > 0`` a Farkas certificate of infeasibility.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .problem import FEASIBLE, INFEASIBLE, UNKNOWN, SdpProblem, SdpSolution, SolveOutcome

__all__ = ["SolverOptions", "solve_feasibility"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol_eq: float = 1e-8
    tol_psd: float = 1e-9
    tol_gap: float = 1e-8
    max_iter: int = 200
    time_limit: float | None = None
    step_fraction: float = 0.98

    @classmethod
    def from_env(cls, **overrides) -> "SolverOptions":
        kw = {}
        if "PATHCERT_SDP_MAXITER" in os.environ:
            kw["max_iter"] = int(os.environ["PATHCERT_SDP_MAXITER"])
        if "PATHCERT_SDP_TOL" in os.environ:
            kw["tol_eq"] = float(os.environ["PATHCERT_SDP_TOL"])
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


class _Data:
    def __init__(self, prob: SdpProblem):
        self.m = prob.n_rows
        self.p = prob.n_free
        self.l = prob.n_nonneg
        self.sizes = prob.psd_sizes
        self.b = prob.rhs
        self.Af = prob.dense_free()
        self.Al = prob.dense_nonneg()
        self.blocks = prob.psd_blocks()
        self.cf = prob.obj_free
        self.cl = prob.obj_nonneg
        self.C = prob.objective_psd_dense()
        self.has_obj = prob.has_objective
        self._pinv = None

    def A(self, xl, X) -> np.ndarray:
        out = self.Al @ xl
        for (rows, mats), Xk in zip(self.blocks, X):
            if rows.size:
                out[rows] += np.einsum("rij,ij->r", mats, Xk)
        return out

    def polish(self, xf, xl, X):
        """Minimum-norm correction of the equality residual, keeping the cone point otherwise unchanged."""
        if self._pinv is None:
            cols = [self.Af, self.Al]
            for (rows, mats), n in zip(self.blocks, self.sizes):
                iu, ju = np.triu_indices(n)
                blk = np.zeros((self.m, iu.size))
                if rows.size:
                    blk[rows] = mats[:, iu, ju] * np.where(iu == ju, 1.0, 2.0)
                cols.append(blk)
            self._pinv = np.linalg.pinv(np.hstack(cols), rcond=1e-13)
        r = self.Af @ xf + self.A(xl, X) - self.b
        delta = -(self._pinv @ r)
        p, l = self.p, self.l
        xf = xf + delta[:p]
        xl = xl + delta[p:p + l]
        k = p + l
        out = []
        for Xk, n in zip(X, self.sizes):
            iu, ju = np.triu_indices(n)
            D = np.zeros((n, n))
            D[iu, ju] = delta[k:k + iu.size]
            k += iu.size
            out.append(Xk + D + np.triu(D, 1).T)
        return xf, xl, out

    def AT_psd(self, y) -> list[np.ndarray]:
        return [np.tensordot(y[rows], mats, axes=1) if rows.size else np.zeros((n, n))
                for (rows, mats), n in zip(self.blocks, self.sizes)]


def _sym(M):
    return 0.5 * (M + M.T)


def _max_step(lam: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha with ``lam + alpha d >= 0`` (vectors)."""
    neg = d < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-lam[neg] / d[neg]))


def _max_step_psd(lam: np.ndarray, D: np.ndarray) -> float:
    """Largest alpha with ``diag(lam) + alpha D`` PSD."""
    s = 1.0 / np.sqrt(lam)
    ev = np.linalg.eigvalsh(_sym(D * np.outer(s, s)))
    if ev[0] >= 0:
        return np.inf
    return -1.0 / ev[0]


def solve_feasibility(problem: SdpProblem, options: SolverOptions | None = None) -> SolveOutcome:
    """Decide feasibility of ``problem`` (or optimize its objective).

    Returns Feasible only with a primal point whose equality residual is
    below ``tol_eq``; Infeasible only with a Farkas witness ``(y, s)`` whose
    normalized residual ``||A^T y + s||`` is below ``tol_eq``. Everything
    else is Unknown.
    """
    opts = options or SolverOptions.from_env()
    t_start = time.perf_counter()
    D = _Data(problem)
    m, p, l, sizes = D.m, D.p, D.l, D.sizes
    nu = l + sum(sizes)

    def outcome(status, sol=None, it=0, msg="", **res):
        return SolveOutcome(status, sol, it, res, msg, time.perf_counter() - t_start)

    if m == 0:
        sol = SdpSolution(np.zeros(p), np.ones(l), tuple(np.eye(n) for n in sizes))
        return outcome(FEASIBLE, sol, 0, "no constraints", primal=0.0)
    if nu == 0 and p == 0:
        res = float(np.max(np.abs(D.b)))
        if res <= opts.tol_eq:
            return outcome(FEASIBLE, SdpSolution(np.zeros(0), np.zeros(0), ()), 0, primal=res)
        y = D.b / float(D.b @ D.b)
        return outcome(INFEASIBLE, SdpSolution(np.zeros(0), np.zeros(0), (), y), 0, "empty cone", witness=0.0)

    xf = np.zeros(p)
    xl = np.ones(l)
    sl = np.ones(l)
    X = [np.eye(n) for n in sizes]
    S = [np.eye(n) for n in sizes]
    y = np.zeros(m)
    tau = kappa = 1.0
    reg = 1e-13 * (1.0 + float(np.max(np.abs(D.Af)))) if p else 0.0
    mu0 = None
    last_polish = np.inf
    it = 0
    msg = "iteration limit"

    while True:
        Ax = D.Af @ xf + D.A(xl, X)
        ATy_psd = D.AT_psd(y)
        ATy_f = D.Af.T @ y
        ATy_l = D.Al.T @ y
        r_p = Ax - D.b * tau
        r_df = ATy_f - D.cf * tau
        r_dl = ATy_l + sl - D.cl * tau
        r_dk = [_sym(a + s - c * tau) for a, s, c in zip(ATy_psd, S, D.C)]
        cx = float(D.cf @ xf + D.cl @ xl + sum(np.sum(c * x) for c, x in zip(D.C, X)))
        by = float(D.b @ y)
        r_g = cx - by + kappa
        gap = float(xl @ sl + sum(np.sum(x * s) for x, s in zip(X, S)) + tau * kappa)
        mu = gap / (nu + 1)
        if mu0 is None:
            mu0 = mu

        log.debug("it=%d pres=%.2e mu=%.2e tau=%.2e kappa=%.2e by=%.2e", it, float(np.max(np.abs(r_p))) / tau, mu, tau, kappa, by)
        # -- termination ----------------------------------------------
        primal_res = float(np.max(np.abs(Ax / tau - D.b)))
        converged = True
        if D.has_obj:
            dual_res = float(max(np.max(np.abs(r_df)) if p else 0.0, np.max(np.abs(r_dl)) if l else 0.0,
                                 max((np.max(np.abs(r)) for r in r_dk), default=0.0))) / tau
            rel_gap = abs(cx - by) / tau / (1.0 + abs(cx / tau))
            converged = dual_res <= opts.tol_eq and rel_gap <= opts.tol_gap
        if converged:
            sol = SdpSolution(xf / tau, xl / tau, tuple(x / tau for x in X), y / tau)
            if primal_res <= opts.tol_eq:
                return _certify_feasible(problem, sol, opts, outcome, it)
            scale = 1.0 + max(float(np.max(np.abs(sol.free), initial=0.0)),
                              max((float(np.max(np.abs(x))) for x in sol.psd), default=0.0))
            if primal_res <= 1e-4 * scale and primal_res < last_polish * 0.1:
                last_polish = primal_res
                pf, pl, pX = D.polish(sol.free, sol.nonneg, sol.psd)
                cand = SdpSolution(pf, pl, tuple(pX), sol.y)
                res = _certify_feasible(problem, cand, opts, outcome, it)
                if res.feasible:
                    return res
        if by > 0:
            far = max(float(np.max(np.abs(ATy_f))) if p else 0.0,
                      float(np.max(np.abs(ATy_l + sl))) if l else 0.0,
                      max((float(np.max(np.abs(a + s))) for a, s in zip(ATy_psd, S)), default=0.0)) / by
            if far <= opts.tol_eq:
                sol = SdpSolution(np.zeros(p), np.zeros(l), (), y / by)
                return outcome(INFEASIBLE, sol, it, "Farkas certificate found", witness=far, primal=primal_res)
        if D.has_obj and cx < 0:
            ray = float(np.max(np.abs(D.Af @ xf + D.A(xl, X)))) / -cx
            if ray <= opts.tol_eq:
                return outcome(UNKNOWN, None, it, "objective unbounded below", primal=primal_res)
        if it >= opts.max_iter:
            break
        if opts.time_limit is not None and time.perf_counter() - t_start > opts.time_limit:
            msg = "time limit"
            break
        if mu < 1e-15 * mu0 or tau < 1e-14 * max(1.0, kappa):
            msg = "stalled without certificate"
            break

        # -- scaling ----------------------------------------------------
        try:
            d = np.sqrt(xl / sl)
            lam_l = np.sqrt(xl * sl)
            Rs, Rinvs, lams, At = [], [], [], []
            for (rows, mats), Xk, Sk in zip(D.blocks, X, S):
                Lx = np.linalg.cholesky(Xk)
                Ls = np.linalg.cholesky(Sk)
                U, sv, Vt = np.linalg.svd(Ls.T @ Lx)
                isq = 1.0 / np.sqrt(sv)
                R = (Lx @ Vt.T) * isq
                Rinv = (isq[:, None] * U.T) @ Ls.T
                Rs.append(R)
                Rinvs.append(Rinv)
                lams.append(sv)
                At.append(np.einsum("ji,rjk,kl->ril", R, mats, R, optimize=True) if rows.size else mats)
        except np.linalg.LinAlgError:
            msg = "numerical breakdown in scaling"
            break

        d2 = d * d
        M = (D.Al * d2) @ D.Al.T
        Ct = [R.T @ C @ R for R, C in zip(Rs, D.C)]
        AWc = D.Al @ (d2 * D.cl)
        cWc = float(np.sum(d2 * D.cl * D.cl))
        for (rows, _), A_t, Ck in zip(D.blocks, At, Ct):
            if rows.size:
                flat = A_t.reshape(len(rows), -1)
                M[np.ix_(rows, rows)] += flat @ flat.T
                AWc[rows] += flat @ Ck.ravel()
            cWc += float(np.sum(Ck * Ck))
        K = np.zeros((m + p + 1, m + p + 1))
        K[:m, :m] = M
        K[np.diag_indices(m)] += 1e-12 * (1.0 + float(np.max(np.diag(M)))) if m else 0.0
        K[:m, m:m + p] = D.Af
        K[m:m + p, :m] = D.Af.T
        K[m:m + p, m:m + p] = -reg * np.eye(p)
        K[:m, -1] = -(AWc + D.b)
        K[m:m + p, -1] = -D.cf
        K[-1, :m] = AWc - D.b
        K[-1, m:m + p] = D.cf
        K[-1, -1] = -(cWc + kappa / tau)
        try:
            lu = sla.lu_factor(K, check_finite=True)
        except (ValueError, np.linalg.LinAlgError):
            msg = "numerical breakdown in factorization"
            break

        def direction(eta, Dl, Dk, Dtau):
            Tl = Dl / lam_l if l else Dl
            ul = d * Tl
            uk = []
            for R, lam, Dm in zip(Rs, lams, Dk):
                T = 2.0 * Dm / (lam[:, None] + lam[None, :])
                uk.append(R @ T @ R.T)
            Au = D.Al @ ul
            AWr = D.Al @ (d2 * r_dl)
            cu = float(D.cl @ ul)
            cWr = float(np.sum(d2 * D.cl * r_dl))
            for (rows, mats), A_t, R, u, r, Ck, C in zip(D.blocks, At, Rs, uk, r_dk, Ct, D.C):
                rt = R.T @ r @ R
                if rows.size:
                    Au[rows] += np.einsum("rij,ij->r", mats, u)
                    AWr[rows] += A_t.reshape(len(rows), -1) @ rt.ravel()
                cu += float(np.sum(C * u))
                cWr += float(np.sum(Ck * rt))
            rhs = np.empty(m + p + 1)
            rhs[:m] = -eta * r_p - Au - eta * AWr
            rhs[m:m + p] = -eta * r_df
            rhs[-1] = -eta * r_g - cu - eta * cWr - Dtau / tau
            sol = sla.lu_solve(lu, rhs)
            dy, dxf, dtau = sol[:m], sol[m:m + p], sol[-1]
            dsl = -(D.Al.T @ dy) + D.cl * dtau - eta * r_dl
            dxl = ul - d2 * dsl
            ATdy = D.AT_psd(dy)
            dS = [_sym(-a + c * dtau - eta * r) for a, c, r in zip(ATdy, D.C, r_dk)]
            dX = [_sym(u - R @ (R.T @ ds @ R) @ R.T) for u, R, ds in zip(uk, Rs, dS)]
            dkappa = (Dtau - kappa * dtau) / tau
            return dxf, dxl, dsl, dX, dS, dy, dtau, dkappa

        def scaled(dxl, dsl, dX, dS):
            sx_l = dxl / d if l else dxl
            ss_l = dsl * d
            sX = [Rinv @ dx @ Rinv.T for Rinv, dx in zip(Rinvs, dX)]
            sS = [R.T @ ds @ R for R, ds in zip(Rs, dS)]
            return sx_l, ss_l, sX, sS

        def step_length(sx_l, ss_l, sX, sS, dtau, dkappa):
            a = np.inf
            if l:
                a = min(a, _max_step(lam_l, sx_l), _max_step(lam_l, ss_l))
            for lam, dx, ds in zip(lams, sX, sS):
                a = min(a, _max_step_psd(lam, dx), _max_step_psd(lam, ds))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        # predictor
        aff = direction(1.0, -lam_l ** 2, [-np.diag(lam ** 2) for lam in lams], -tau * kappa)
        sa = scaled(aff[1], aff[2], aff[3], aff[4])
        a_aff = min(1.0, step_length(*sa, aff[6], aff[7]))
        sigma = float(np.clip((1.0 - a_aff) ** 3, 0.0, 1.0))
        # corrector
        Dl = sigma * mu - lam_l ** 2 - sa[0] * sa[1]
        Dk = [sigma * mu * np.eye(len(lam)) - np.diag(lam ** 2) - _sym(dx @ ds) for lam, dx, ds in zip(lams, sa[2], sa[3])]
        Dtau = sigma * mu - tau * kappa - aff[6] * aff[7]
        dxf, dxl, dsl, dX, dS, dy, dtau, dkappa = direction(1.0 - sigma, Dl, Dk, Dtau)
        sc = scaled(dxl, dsl, dX, dS)
        alpha = min(1.0, opts.step_fraction * step_length(*sc, dtau, dkappa))
        if not np.isfinite(alpha) or not np.all(np.isfinite(dy)):
            msg = "numerical breakdown in step"
            break

        xf = xf + alpha * dxf
        xl = xl + alpha * dxl
        sl = sl + alpha * dsl
        X = [_sym(x + alpha * dx) for x, dx in zip(X, dX)]
        S = [_sym(s + alpha * ds) for s, ds in zip(S, dS)]
        y = y + alpha * dy
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        it += 1

    return outcome(UNKNOWN, None, it, msg, primal=primal_res, mu=mu, tau=tau, kappa=kappa)


def _certify_feasible(problem: SdpProblem, sol: SdpSolution, opts: SolverOptions, outcome, it) -> SolveOutcome:
    res = problem.equality_residual(sol.free, sol.nonneg, sol.psd)
    res_inf = float(np.max(np.abs(res))) if res.size else 0.0
    min_eig = min((float(np.linalg.eigvalsh(x)[0]) for x in sol.psd), default=np.inf)
    min_lp = float(np.min(sol.nonneg)) if sol.nonneg.size else np.inf
    floor = min(min_eig, min_lp)
    if res_inf <= opts.tol_eq and floor >= -opts.tol_psd:
        return outcome(FEASIBLE, sol, it, "primal point found", primal=res_inf, min_eig=floor)
    return outcome(UNKNOWN, None, it, "candidate failed independent recheck", primal=res_inf, min_eig=floor)
