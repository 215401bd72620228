"""Container for mixed-integer linear programs with binary integer variables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "==", ">="
_SENSES = (LE, EQ, GE)


@dataclass(frozen=True, eq=False)
class MILPModel:
    """Minimisation problem ``min c @ x`` s.t. ``A x (sense) rhs``, ``lb <= x <= ub``.

    Integer variables are restricted to binaries; ``binary[i]`` marks them.
    ``var_index`` maps an arbitrary hashable key (for lot-sizing models a
    ``(role, t, j, s)`` tuple) to a column.
    """

    names: tuple[str, ...]
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    A: sp.csr_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray
    row_names: tuple[str, ...] = ()
    var_index: dict = field(default_factory=dict)
    objective_constant: float = 0.0

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_constraints(self) -> int:
        return len(self.rhs)

    @property
    def n_binaries(self) -> int:
        return int(self.binary.sum())

    def col(self, key: Hashable) -> int:
        return self.var_index[key]

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float) + self.objective_constant)

    def relaxed(self) -> "MILPModel":
        """Copy with integrality dropped (binaries become [0, 1] continuous)."""
        return MILPModel(
            self.names, self.c, self.lb, self.ub, np.zeros_like(self.binary),
            self.A, self.senses, self.rhs, self.row_names, self.var_index,
            self.objective_constant,
        )

    def with_bounds(self, lb, ub) -> "MILPModel":
        return MILPModel(
            self.names, self.c, np.asarray(lb, dtype=float), np.asarray(ub, dtype=float),
            self.binary, self.A, self.senses, self.rhs, self.row_names,
            self.var_index, self.objective_constant,
        )

    def max_violation(self, x) -> float:
        """Largest absolute violation of any bound or constraint at ``x``."""
        x = np.asarray(x, dtype=float)
        viol = max(0.0, float(np.max(self.lb - x, initial=0.0)),
                   float(np.max(x - self.ub, initial=0.0)))
        if self.n_constraints:
            ax = self.A @ x
            s = np.array(self.senses)
            gap = ax - self.rhs
            viol = max(viol,
                       float(np.max(np.where(s == LE, gap, 0.0), initial=0.0)),
                       float(np.max(np.where(s == GE, -gap, 0.0), initial=0.0)),
                       float(np.max(np.where(s == EQ, np.abs(gap), 0.0), initial=0.0)))
        return viol


class ModelBuilder:
    """Incrementally assemble a :class:`MILPModel`."""

    def __init__(self):
        self._names: list[str] = []
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._bin: list[bool] = []
        self._index: dict = {}
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self.constant = 0.0

    def add_var(self, key=None, *, lb=0.0, ub=np.inf, cost=0.0, binary=False, name=None) -> int:
        idx = len(self._c)
        if binary:
            lb, ub = max(0.0, float(lb)), min(1.0, float(ub))
        if key is not None:
            if key in self._index:
                raise KeyError(f"duplicate variable key {key!r}")
            self._index[key] = idx
        self._names.append(name if name is not None else _default_name(key, idx))
        self._c.append(float(cost))
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._bin.append(bool(binary))
        return idx

    def add_cost(self, idx: int, cost: float):
        self._c[idx] += float(cost)

    def add_constr(self, terms, sense: str, rhs: float, name: str | None = None) -> int:
        """Add ``sum(coef * x[idx]) (sense) rhs``; ``terms`` is an iterable of (idx, coef)."""
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        if not np.isfinite(rhs):
            raise ValueError("constraint right-hand side must be finite")
        row = len(self._rhs)
        for idx, coef in terms:
            if coef != 0.0:
                self._rows.append(row)
                self._cols.append(int(idx))
                self._vals.append(float(coef))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"c{row}")
        return row

    def build(self) -> MILPModel:
        n, m = len(self._c), len(self._rhs)
        A = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(m, n))
        A.sum_duplicates()
        return MILPModel(
            names=tuple(self._names),
            c=np.array(self._c, dtype=float),
            lb=np.array(self._lb, dtype=float),
            ub=np.array(self._ub, dtype=float),
            binary=np.array(self._bin, dtype=bool),
            A=A,
            senses=tuple(self._senses),
            rhs=np.array(self._rhs, dtype=float),
            row_names=tuple(self._row_names),
            var_index=dict(self._index),
            objective_constant=self.constant,
        )


def _default_name(key, idx: int) -> str:
    if key is None:
        return f"v{idx}"
    if isinstance(key, tuple):
        return "_".join(str(k) for k in key if k is not None)
    return str(key)


def from_arrays(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
                binary=None) -> MILPModel:
    """Build a model from dense arrays, scipy ``linprog`` style."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    lb = np.zeros(n) if lb is None else np.broadcast_to(np.asarray(lb, dtype=float), (n,))
    ub = np.full(n, np.inf) if ub is None else np.broadcast_to(np.asarray(ub, dtype=float), (n,))
    binary = np.zeros(n, bool) if binary is None else np.asarray(binary, dtype=bool)
    b = ModelBuilder()
    for i in range(n):
        b.add_var(i, lb=lb[i], ub=ub[i], cost=c[i], binary=binary[i])
    for A_, b_, sense in ((A_ub, b_ub, LE), (A_eq, b_eq, EQ)):
        if A_ is None:
            continue
        for row, r in zip(np.atleast_2d(A_), np.atleast_1d(b_)):
            b.add_constr(enumerate(row), sense, r)
    return b.build()
