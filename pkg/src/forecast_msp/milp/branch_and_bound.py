"""Best-bound branch-and-bound over binary variables."""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .problem import MILPModel
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, BoundedSimplex

NODE_LIMIT = "node_limit"
TIME_LIMIT = "time_limit"

INT_TOL = 1e-6


@dataclass
class MILPSolution:
    status: str
    objective: float
    best_bound: float
    x: np.ndarray | None
    nodes: int
    root_bound: float = np.nan
    trace: list = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        return self.objective - self.best_bound


@dataclass
class _Node:
    lb: np.ndarray
    ub: np.ndarray
    basis: object
    bound: float
    depth: int = 0


def _most_fractional(x, bin_idx):
    v = x[bin_idx]
    frac = np.minimum(v - np.floor(v), np.ceil(v) - v)
    k = int(np.argmax(frac))
    if frac[k] <= INT_TOL:
        return None
    return int(bin_idx[k])


def solve_milp(model: MILPModel, *, abs_gap: float = 1e-6, node_limit: int | None = None,
               time_limit: float | None = None, trace: bool = False) -> MILPSolution:
    """Solve ``model`` to within ``abs_gap`` of optimality.

    Each node's LP relaxation is re-optimised by the dual simplex from the
    parent's basis.  Branching picks the most fractional binary (lowest
    index on ties).  The search dives depth-first, following the rounding
    direction of the branching variable, and backtracks to the open node
    with the smallest parent bound (first-in-first-out among equal bounds).

    With ``trace=True`` the ``(best_bound, incumbent)`` pair seen at each
    processed node is recorded on the returned solution.
    """
    start = time.monotonic()
    lp = BoundedSimplex(model)
    bin_idx = np.flatnonzero(model.binary)
    lb0 = model.lb.astype(float).copy()
    ub0 = model.ub.astype(float).copy()
    lb0[bin_idx] = np.ceil(lb0[bin_idx] - INT_TOL)
    ub0[bin_idx] = np.floor(ub0[bin_idx] + INT_TOL)

    root, basis = lp.solve(lb0, ub0)
    if root.status == INFEASIBLE:
        return MILPSolution(INFEASIBLE, np.nan, np.nan, None, 1)
    if root.status == UNBOUNDED:
        # binaries are bounded, so an unbounded relaxation means an unbounded MILP
        return MILPSolution(UNBOUNDED, -np.inf, -np.inf, None, 1)

    incumbent, best_x = np.inf, None
    heap: list = []
    counter = itertools.count()
    nodes = 0
    records = []
    status = OPTIMAL
    current: _Node | None = None
    current_sol = root
    current_basis = basis
    node = _Node(lb0, ub0, basis, root.objective)

    def open_bound(extra=np.inf):
        b = heap[0][0] if heap else np.inf
        return min(b, extra)

    while True:
        nodes += 1
        if current is None:
            sol, nb = current_sol, current_basis
        else:
            sol, nb = lp.reoptimize(current.lb, current.ub, current.basis)
            node = current
        if trace:
            records.append((min(open_bound(node.bound), incumbent), incumbent))
        child = None
        if sol.status == OPTIMAL and sol.objective < incumbent - abs_gap:
            j = _most_fractional(sol.x, bin_idx) if len(bin_idx) else None
            if j is None:
                incumbent, best_x = sol.objective, sol.x.copy()
                if len(bin_idx):
                    best_x[bin_idx] = np.round(best_x[bin_idx])
            else:
                v = sol.x[j]
                down_ub = node.ub.copy()
                down_ub[j] = np.floor(v)
                up_lb = node.lb.copy()
                up_lb[j] = np.ceil(v)
                down = _Node(node.lb, down_ub, nb, sol.objective, node.depth + 1)
                up = _Node(up_lb, node.ub, nb, sol.objective, node.depth + 1)
                child, other = (up, down) if v - np.floor(v) >= 0.5 else (down, up)
                heapq.heappush(heap, (other.bound, next(counter), other))

        if node_limit is not None and nodes >= node_limit:
            status = NODE_LIMIT
            if child is not None:
                heapq.heappush(heap, (child.bound, next(counter), child))
            break
        if time_limit is not None and time.monotonic() - start > time_limit:
            status = TIME_LIMIT
            if child is not None:
                heapq.heappush(heap, (child.bound, next(counter), child))
            break
        if child is None:
            if heap and heap[0][0] >= incumbent - abs_gap:
                heap.clear()
            if not heap:
                break
            _, _, child = heapq.heappop(heap)
        current = child

    best_bound = min(open_bound(), incumbent)
    if status == OPTIMAL and best_x is None:
        status = INFEASIBLE
    return MILPSolution(
        status=status,
        objective=incumbent if best_x is not None else np.nan,
        best_bound=best_bound if np.isfinite(best_bound) else np.nan,
        x=best_x,
        nodes=nodes,
        root_bound=root.objective,
        trace=records,
    )
