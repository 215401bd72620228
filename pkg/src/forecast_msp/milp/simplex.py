"""Revised bounded-variable simplex with an explicit basis inverse.

The primal method solves LPs from scratch (two phases, artificial
variables).  The dual method re-optimises after bound changes starting
from a previous optimal basis; branch-and-bound uses it at every node.
The basis inverse is kept dense and updated in place by a rank-one BLAS
call per pivot.  Every ``REFACTOR_EVERY`` pivots a random probe checks
``B @ Binv`` against the identity and the inverse is rebuilt on drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg.blas import dger

from .problem import EQ, GE, LE, MILPModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
BLAND_AFTER = 1000
REFACTOR_EVERY = 100
RESIDUAL_TOL = 1e-9
DRIFT_TOL = 1e-10
MAX_ITER = 100_000


@dataclass
class LPSolution:
    status: str
    objective: float
    x: np.ndarray | None
    iterations: int = 0


@dataclass(frozen=True)
class Basis:
    """Enough information to rebuild a basis: basic columns, nonbasic bound status."""

    basic: np.ndarray
    at_upper: np.ndarray
    art_sign: np.ndarray


class BoundedSimplex:
    """Standard form of a :class:`MILPModel` with one slack per inequality and
    one artificial per row.

    Column layout is ``[structural | slacks | artificials]``.  Artificials are
    fixed at zero outside phase 1.
    """

    def __init__(self, model: MILPModel):
        A = sparse.csr_matrix(model.A)
        row_nnz = np.diff(A.indptr)
        keep = np.flatnonzero(row_nnz > 0)
        self._empty_ok = _empty_rows_feasible(model, np.flatnonzero(row_nnz == 0))
        A = A[keep]
        senses = [model.senses[i] for i in keep]
        self.b = model.rhs[keep].astype(float)
        m, n = A.shape
        ineq = [i for i, s in enumerate(senses) if s != EQ]
        signs = [1.0 if senses[i] == LE else -1.0 for i in ineq]
        S = sparse.csr_matrix((signs, (ineq, range(len(ineq)))), shape=(m, len(ineq)))
        self.A0 = sparse.hstack([A, S], format="csc")
        self.m, self.n = m, n
        self.n_slack = len(ineq)
        self.N = n + self.n_slack + m
        self.slack_row = np.asarray(ineq, dtype=int)
        self.slack_sign = np.asarray(signs)
        self.c = np.concatenate([model.c, np.zeros(self.n_slack + m)])
        self.constant = model.objective_constant
        if np.any(np.isneginf(model.lb)):
            raise ValueError("variables must have finite lower bounds")
        self._fixed_lb = np.zeros(self.n_slack + m)
        self._fixed_ub = np.concatenate([np.full(self.n_slack, np.inf), np.zeros(m)])
        self.iterations = 0
        self._art_sign = None
        self._probe = np.random.default_rng(0).uniform(-1.0, 1.0, m)

    # -- bounds / columns -------------------------------------------------
    def _bounds(self, lb, ub):
        return (np.concatenate([lb, self._fixed_lb]).astype(float),
                np.concatenate([ub, self._fixed_ub]).astype(float))

    def _set_matrix(self, art_sign):
        if self._art_sign is not None and np.array_equal(art_sign, self._art_sign):
            return
        art = sparse.diags(art_sign, format="csc", shape=(self.m, self.m))
        self.A = sparse.hstack([self.A0, art], format="csc")
        self.At = self.A.T.tocsr()
        self._art_sign = np.array(art_sign, dtype=float)

    # -- factorisation ------------------------------------------------------
    def _load(self, l, u, basic, at_upper, c):
        self.l, self.u, self.cost = l, u, c
        self.basic = np.array(basic, dtype=int)
        self.at_upper = np.array(at_upper, dtype=bool)
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basic] = True
        self._refactor()

    def _maybe_refactor(self):
        """Rebuild the inverse only when a probe shows it has drifted."""
        self._since_refactor = 0
        probe = self._probe[:self.m]
        B = self.A[:, self.basic]
        if float(np.max(np.abs(B @ (self.Binv @ probe) - probe))) > DRIFT_TOL:
            self._refactor()

    def _refactor(self):
        B = self.A[:, self.basic].toarray()
        self.Binv = np.asfortranarray(np.linalg.inv(B)) if self.m else np.zeros((0, 0), order="F")
        self._since_refactor = 0
        self._recompute()

    def _recompute(self):
        """Basic values and reduced costs from the current inverse."""
        xn = np.where(self.at_upper, self.u, self.l)
        xn[self.basic] = 0.0
        self.beta = self.Binv @ (self.b - self.A @ xn)
        y = self.cost[self.basic] @ self.Binv
        self.d = self.cost - self.At @ y
        self.d[self.basic] = 0.0

    def _column(self, j):
        lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
        return self.Binv[:, self.A.indices[lo:hi]] @ self.A.data[lo:hi]

    def _row(self, r):
        return self.At @ self.Binv[r]

    def _pivot(self, r, j, alpha, row):
        """Basis change: column ``j`` replaces the ``r``-th basic variable.

        ``alpha`` is the entering column and ``row`` the ``r``-th tableau row,
        both taken before the pivot.
        """
        piv = alpha[r]
        self.Binv[r] /= piv
        col = alpha.copy()
        col[r] = 0.0
        self.Binv = dger(-1.0, col, self.Binv[r].copy(), a=self.Binv, overwrite_a=1)
        self.d -= (self.d[j] / piv) * row
        self.d[j] = 0.0
        leaving = self.basic[r]
        self.is_basic[leaving] = False
        self.is_basic[j] = True
        self.basic[r] = j
        self.at_upper[j] = False
        self._since_refactor += 1
        self.iterations += 1

    def _x(self):
        x = np.where(self.at_upper, self.u, self.l)
        x[self.basic] = self.beta
        return x

    def _residual(self) -> float:
        if not self.m:
            return 0.0
        return float(np.max(np.abs(self.A @ self._x() - self.b)))

    # -- primal -----------------------------------------------------------
    def _primal(self) -> str:
        degenerate = 0
        bland = False
        movable = self.u - self.l > 0.0
        for _ in range(MAX_ITER):
            if self._since_refactor >= REFACTOR_EVERY:
                self._maybe_refactor()
            d = self.d
            nb = ~self.is_basic & movable
            inc = nb & ~self.at_upper & (d < -OPT_TOL)
            dec = nb & self.at_upper & (d > OPT_TOL)
            cand = inc | dec
            if not cand.any():
                return OPTIMAL
            if bland:
                j = int(np.argmax(cand))
            else:
                j = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
            sigma = 1.0 if inc[j] else -1.0
            col = self._column(j)
            alpha = sigma * col
            lB, uB = self.l[self.basic], self.u[self.basic]
            ratios = np.full(self.m, np.inf)
            pos = alpha > PIVOT_TOL
            neg = alpha < -PIVOT_TOL
            ratios[pos] = (self.beta[pos] - lB[pos]) / alpha[pos]
            with np.errstate(invalid="ignore"):
                ratios[neg] = (uB[neg] - self.beta[neg]) / -alpha[neg]
            ratios = np.maximum(ratios, 0.0)
            rmin = ratios.min() if self.m else np.inf
            span = self.u[j] - self.l[j]
            if span <= rmin:
                if not np.isfinite(span):
                    return UNBOUNDED
                self.beta -= span * alpha
                self.at_upper[j] = not self.at_upper[j]
                degenerate = 0
                continue
            if not np.isfinite(rmin):
                return UNBOUNDED
            ties = np.flatnonzero(ratios <= rmin)
            if bland:
                r = int(ties[np.argmin(self.basic[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            theta = rmin
            enter_val = (self.u[j] if self.at_upper[j] else self.l[j]) + sigma * theta
            leave_upper = alpha[r] < 0
            self.beta -= theta * alpha
            leaving = self.basic[r]
            self._pivot(r, j, col, self._row(r))
            self.at_upper[leaving] = leave_upper
            self.beta[r] = enter_val
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= BLAND_AFTER:
                    bland = True
            else:
                degenerate = 0
                bland = False
        raise RuntimeError("simplex iteration limit reached")

    # -- dual ---------------------------------------------------------------
    def _dual(self) -> str:
        movable = self.u - self.l > 0.0
        for _ in range(MAX_ITER):
            if self._since_refactor >= REFACTOR_EVERY:
                self._maybe_refactor()
            lB, uB = self.l[self.basic], self.u[self.basic]
            below = lB - self.beta
            above = self.beta - uB
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if self.m else 0
            if not self.m or viol[r] <= FEAS_TOL:
                return OPTIMAL
            row = self._row(r)
            nb = ~self.is_basic & movable
            if below[r] > 0:
                target = lB[r]
                elig = nb & ((~self.at_upper & (row < -PIVOT_TOL)) | (self.at_upper & (row > PIVOT_TOL)))
            else:
                target = uB[r]
                elig = nb & ((~self.at_upper & (row > PIVOT_TOL)) | (self.at_upper & (row < -PIVOT_TOL)))
            if not elig.any():
                return INFEASIBLE
            idx = np.flatnonzero(elig)
            ratios = np.abs(self.d[idx]) / np.abs(row[idx])
            best = ratios.min()
            ties = idx[ratios <= best + OPT_TOL]
            j = int(ties[np.argmax(np.abs(row[ties]))])
            col = self._column(j)
            leave_upper = below[r] <= 0
            delta = (self.beta[r] - target) / col[r]
            enter_val = (self.u[j] if self.at_upper[j] else self.l[j]) + delta
            self.beta -= delta * col
            leaving = self.basic[r]
            self._pivot(r, j, col, row)
            self.at_upper[leaving] = leave_upper
            self.beta[r] = enter_val
        raise RuntimeError("dual simplex iteration limit reached")

    # -- drivers ------------------------------------------------------------
    def solve(self, lb, ub) -> tuple[LPSolution, Basis | None]:
        """Solve from scratch with structural bounds ``lb``/``ub``."""
        if not self._empty_ok:
            return LPSolution(INFEASIBLE, np.nan, None), None
        l, u = self._bounds(lb, ub)
        if np.any(l > u + FEAS_TOL):
            return LPSolution(INFEASIBLE, np.nan, None), None
        n, ns, m = self.n, self.n_slack, self.m
        at_upper = np.zeros(self.N, dtype=bool)
        x0 = l.copy()
        x0[n:] = 0.0
        resid = self.b - self.A0[:, :n] @ x0[:n]
        art_sign = np.where(resid >= 0, 1.0, -1.0)
        self._set_matrix(art_sign)
        basic = n + ns + np.arange(m)
        slack_ok = self.slack_sign * resid[self.slack_row] >= 0
        basic[self.slack_row[slack_ok]] = n + np.flatnonzero(slack_ok)
        needs_art = np.flatnonzero(basic >= n + ns)
        if len(needs_art):
            u1 = u.copy()
            u1[n + ns + needs_art] = np.inf
            c1 = np.zeros(self.N)
            c1[n + ns + needs_art] = 1.0
            self._load(l, u1, basic, at_upper, c1)
            self._primal()
            self._refactor()
            infeas = float(c1 @ self._x())
            if infeas > FEAS_TOL * (1.0 + float(np.max(np.abs(self.b), initial=0.0))):
                return LPSolution(INFEASIBLE, np.nan, None, self.iterations), None
            self.u = u
            self.at_upper[n + ns:] = False
            self.cost = self.c
            self._recompute()
            # artificials still basic sit at ~0; the dual pass pushes them out
            status = self._dual()
            if status != OPTIMAL:
                return LPSolution(INFEASIBLE, np.nan, None, self.iterations), None
        else:
            self._load(l, u, basic, at_upper, self.c)
        return self._finish(art_sign)

    def reoptimize(self, lb, ub, basis: Basis) -> tuple[LPSolution, Basis | None]:
        """Re-solve with new structural bounds by the dual simplex.

        Reduced costs do not depend on bounds, so any optimal basis of the
        same objective stays dual feasible.  The basis the solver currently
        holds is reused together with its factorisation; ``basis`` is loaded
        (and factorised) only when the solver holds none.
        """
        if not self._empty_ok:
            return LPSolution(INFEASIBLE, np.nan, None), None
        l, u = self._bounds(lb, ub)
        if np.any(l > u + FEAS_TOL):
            return LPSolution(INFEASIBLE, np.nan, None), None
        warm = (getattr(self, "basic", None) is not None and self._art_sign is not None
                and np.array_equal(basis.art_sign, self._art_sign) and self.cost is self.c)
        if warm:
            self.l, self.u = l, u
            self.at_upper &= np.isfinite(u)
            self._recompute()
        else:
            self._set_matrix(basis.art_sign)
            self._load(l, u, basis.basic, basis.at_upper & np.isfinite(u), self.c)
        status = self._dual()
        if status == INFEASIBLE:
            return LPSolution(INFEASIBLE, np.nan, None, self.iterations), None
        return self._finish(basis.art_sign)

    def _finish(self, art_sign) -> tuple[LPSolution, Basis | None]:
        for _ in range(5):
            status = self._primal()
            if status == UNBOUNDED:
                return LPSolution(UNBOUNDED, -np.inf, None, self.iterations), None
            if self._residual() > RESIDUAL_TOL * (1.0 + float(np.max(np.abs(self.b), initial=0.0))):
                self._refactor()
            else:
                self._recompute()
            x = self._x()
            pviol = max(float(np.max(self.l - x, initial=0.0)),
                        float(np.max(x - self.u, initial=0.0)))
            if pviol > FEAS_TOL:
                if self._dual() == INFEASIBLE:
                    return LPSolution(INFEASIBLE, np.nan, None, self.iterations), None
                continue
            nb = ~self.is_basic & (self.u - self.l > 0)
            dviol = np.any(nb & ~self.at_upper & (self.d < -OPT_TOL)) or \
                np.any(nb & self.at_upper & (self.d > OPT_TOL))
            if not dviol:
                break
        x = self._x()
        xs = np.clip(x[:self.n], self.l[:self.n], self.u[:self.n])
        obj = float(self.c[:self.n] @ xs + self.constant)
        basis = Basis(self.basic.copy(), self.at_upper.copy(), art_sign)
        return LPSolution(OPTIMAL, obj, xs, self.iterations), basis


def _empty_rows_feasible(model: MILPModel, rows) -> bool:
    for i in rows:
        s, r = model.senses[i], model.rhs[i]
        if (s == LE and r < -FEAS_TOL) or (s == GE and r > FEAS_TOL) or (s == EQ and abs(r) > FEAS_TOL):
            return False
    return True


def solve_lp(model: MILPModel) -> LPSolution:
    """Solve the LP relaxation of ``model`` (binary flags are ignored).

    Primal simplex with Dantzig pricing; Bland's rule takes over after
    1000 consecutive degenerate pivots.
    """
    solver = BoundedSimplex(model)
    sol, _ = solver.solve(model.lb, model.ub)
    return sol
