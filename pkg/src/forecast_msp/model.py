"""Lot-sizing instances with backlogging and a one-period production lag,
compiled into mixed-integer programs.

Variables are keyed ``(role, t, j, s)`` with roles ``x`` (production),
``y`` (setup), ``ip`` (inventory), ``im`` (backlog) and ``o`` (overtime,
``j=None``).  Variables of the current period are shared by every
scenario and carry ``s=None``; later periods carry the scenario index
(``0`` for single-scenario models).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .exceptions import DimensionMismatch, InfeasibleState, NotOptimal
from .milp import EQ, LE, MILPModel, MILPSolution, ModelBuilder

STATE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class MSlagInstance:
    """Deterministic parameters of a lot-sizing instance over ``T`` periods and ``J`` products.

    Per-period arrays have shape ``(T,)``, per-period-per-product arrays ``(T, J)``.
    ``big_m`` overrides the derived setup-linking bounds when given.
    """

    setup_time: np.ndarray
    unit_time: np.ndarray
    capacity: np.ndarray
    inventory_cap: np.ndarray
    overtime_cap: np.ndarray
    setup_cost: np.ndarray
    backlog_cost: np.ndarray
    holding_cost: np.ndarray
    overtime_cost: np.ndarray
    product_ids: tuple = ()
    big_m: np.ndarray | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "product_ids" or v is None:
                continue
            object.__setattr__(self, f.name, np.asarray(v, dtype=float))
        T, J = self.T, self.J
        shapes = {
            "setup_time": (J,), "unit_time": (J,), "capacity": (T,), "overtime_cap": (T,),
            "overtime_cost": (T,), "inventory_cap": (T, J), "setup_cost": (T, J),
            "backlog_cost": (T, J), "holding_cost": (T, J),
        }
        if self.big_m is not None:
            shapes["big_m"] = (T, J)
        for name, shape in shapes.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {shape}")
            if np.any(np.isnan(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
        if not self.product_ids:
            object.__setattr__(self, "product_ids", tuple(str(j) for j in range(J)))
        elif len(self.product_ids) != J:
            raise DimensionMismatch("product_ids length differs from product count")

    @property
    def T(self) -> int:
        return self.inventory_cap.shape[0]

    @property
    def J(self) -> int:
        return self.inventory_cap.shape[1]

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = _jsonable(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MSlagInstance":
        kw = dict(d)
        kw["product_ids"] = tuple(kw.get("product_ids", ()))
        for k, v in list(kw.items()):
            if k != "product_ids" and v is not None:
                # infinite capacities are stored as null
                arr = np.array(v, dtype=float)
                kw[k] = np.where(np.isnan(arr), np.inf, arr)
        return cls(**kw)

    def __eq__(self, other):
        if not isinstance(other, MSlagInstance):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True


def _jsonable(a: np.ndarray):
    return [None if not np.isfinite(v) else float(v) for v in a.ravel()] if a.ndim == 1 else \
        [_jsonable(row) for row in a]


@dataclass(frozen=True, eq=False)
class SystemState:
    """Realised per-product inventory, backlog and production in transit."""

    inventory: np.ndarray
    backlog: np.ndarray
    pipeline: np.ndarray

    def __post_init__(self):
        for name in ("inventory", "backlog", "pipeline"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(arr < -STATE_TOL):
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, np.maximum(arr, 0.0))
        if not (self.inventory.shape == self.backlog.shape == self.pipeline.shape):
            raise DimensionMismatch("state arrays differ in length")

    @classmethod
    def zeros(cls, J: int) -> "SystemState":
        return cls(np.zeros(J), np.zeros(J), np.zeros(J))

    @property
    def J(self) -> int:
        return len(self.inventory)


@dataclass(frozen=True, eq=False)
class Decision:
    """First-period decision extracted from a solved look-ahead model."""

    production: np.ndarray
    setup: np.ndarray
    overtime: float
    inventory: np.ndarray
    backlog: np.ndarray
    snapped: tuple = ()

    @classmethod
    def idle(cls, J: int) -> "Decision":
        z = np.zeros(J)
        return cls(z, np.zeros(J, dtype=int), 0.0, z, z)


def _as_matrix(obj) -> np.ndarray:
    return np.asarray(getattr(obj, "demands", obj), dtype=float)


def _scenario_blocks(scenarios) -> list[np.ndarray]:
    if hasattr(scenarios, "scenarios"):
        return [_as_matrix(s) for s in scenarios.scenarios]
    if isinstance(scenarios, (list, tuple)):
        return [_as_matrix(s) for s in scenarios]
    arr = np.asarray(scenarios, dtype=float)
    if arr.ndim == 2:
        return [arr]
    return list(arr)


def _check_inputs(inst: MSlagInstance, state: SystemState, t: int, current_demand, blocks):
    if not 0 <= t < inst.T:
        raise DimensionMismatch(f"period {t} outside horizon of {inst.T}")
    if state.J != inst.J:
        raise DimensionMismatch("state product count differs from instance")
    d = np.asarray(current_demand, dtype=float)
    if d.shape != (inst.J,):
        raise DimensionMismatch(f"current demand has shape {d.shape}, expected ({inst.J},)")
    if np.any(d < 0):
        raise ValueError("demand must be nonnegative")
    for blk in blocks:
        if blk.ndim != 2 or blk.shape[1] != inst.J:
            raise DimensionMismatch(f"scenario block has shape {blk.shape}")
        if t + 1 + blk.shape[0] > inst.T:
            raise DimensionMismatch("scenario extends past the instance horizon")
        if np.any(blk < 0) or not np.all(np.isfinite(blk)):
            raise ValueError("scenario demands must be finite and nonnegative")
    if len({blk.shape[0] for blk in blocks}) > 1:
        raise DimensionMismatch("scenarios differ in length")
    if np.any(state.inventory + state.pipeline > inst.inventory_cap[t] + STATE_TOL):
        raise InfeasibleState("inventory plus arriving production exceeds inventory capacity")
    return d


def _link_bound(inst: MSlagInstance, t: int, requirement: np.ndarray) -> np.ndarray:
    """Tightest valid per-product production bound at period ``t``."""
    if inst.big_m is not None:
        return inst.big_m[t].copy()
    bound = requirement.astype(float).copy()
    if t + 1 < inst.T:
        bound = np.minimum(bound, inst.inventory_cap[t + 1])
    room = inst.capacity[t] + inst.overtime_cap[t] - inst.setup_time
    with np.errstate(divide="ignore", invalid="ignore"):
        cap = np.where(inst.unit_time > 0, room / inst.unit_time, np.where(room >= 0, np.inf, 0.0))
    return np.maximum(np.minimum(bound, cap), 0.0)


def _requirement(state: SystemState, current: np.ndarray, block: np.ndarray) -> np.ndarray:
    # total production any optimal plan needs over the block
    total = state.backlog + current + block.sum(axis=0) - state.inventory - state.pipeline
    return np.maximum(total, 0.0)


class _Builder:
    """Adds periods to a model and strengthens the setup linking.

    Besides ``x <= M y`` every produced lot gets cover inequalities.  A lot
    ``x_k`` arrives at ``k + 1`` and either clears the backlog ``im_k``,
    serves demand of ``k+1 .. l`` or is still in stock at the end of ``l``:
    ``x_k <= im_k + D(k+1..l) y_k + ip_l``.  At the end of the look-ahead,
    stock left over is pure cost, so ``x_k <= im_k + D(k+1..end) y_k`` holds
    for some optimal plan.
    """

    def __init__(self, inst: MSlagInstance, t0: int, n_periods: int):
        self.inst = inst
        self.t0 = t0
        self.last = t0 + n_periods - 1
        self.mb = ModelBuilder()
        self.strengthen = inst.big_m is None

    def period(self, t, s, demand, prev, weight, M):
        """Add the variables and constraints of period ``t`` in scenario ``s``.

        ``prev`` holds, per product, ``(ip, im, x)`` of the previous period as
        either variable indices or constants.  Returns the new ``prev`` and a
        record of the period for :meth:`cover_cuts`.
        """
        inst, mb = self.inst, self.mb
        J = inst.J
        terminal = t == inst.T - 1
        xs, ys, ips, ims = [], [], [], []
        for j in range(J):
            xs.append(mb.add_var(("x", t, j, s), ub=0.0 if terminal else np.inf))
            ys.append(mb.add_var(("y", t, j, s), binary=True, cost=weight * inst.setup_cost[t, j]))
            ips.append(mb.add_var(("ip", t, j, s), ub=inst.inventory_cap[t, j],
                                  cost=weight * inst.holding_cost[t, j]))
            ims.append(mb.add_var(("im", t, j, s), cost=weight * inst.backlog_cost[t, j]))
        o = mb.add_var(("o", t, None, s), ub=inst.overtime_cap[t], cost=weight * inst.overtime_cost[t])
        for j in range(J):
            terms = [(ims[j], 1.0), (ips[j], -1.0)]
            rhs = float(demand[j])
            for val, coef in zip(prev[j], (1.0, -1.0, 1.0)):
                if isinstance(val, (int, np.integer)):
                    terms.append((int(val), coef))
                else:
                    rhs -= coef * float(val)
            mb.add_constr(terms, EQ, rhs, f"flow_{t}_{j}_{s}")
        load = [(ys[j], inst.setup_time[j]) for j in range(J)] + \
               [(xs[j], inst.unit_time[j]) for j in range(J)] + [(o, -1.0)]
        mb.add_constr(load, LE, inst.capacity[t], f"overtime_{t}_{s}")
        for j in range(J):
            mb.add_constr([(xs[j], 1.0), (ys[j], -float(M[j]))], LE, 0.0, f"link_{t}_{j}_{s}")
            if not terminal and np.isfinite(inst.inventory_cap[t + 1, j]):
                mb.add_constr([(ips[j], 1.0), (xs[j], 1.0)], LE, inst.inventory_cap[t + 1, j],
                              f"invcap_{t}_{j}_{s}")
        rec = (t, xs, ys, ips, ims, np.asarray(demand, dtype=float), np.asarray(M, dtype=float))
        return [(ips[j], ims[j], xs[j]) for j in range(J)], rec

    def chain(self, s, block, prev, weight, requirement, first):
        """Add scenario ``s`` after the shared period ``first`` (a record)."""
        path = [first]
        for k, row in enumerate(block):
            t = self.t0 + 1 + k
            prev, rec = self.period(t, s, row, prev, weight, _link_bound(self.inst, t, requirement))
            path.append(rec)
        self.cover_cuts(path, s, skip_first_end=True)
        return prev

    def cover_cuts(self, path, s, skip_first_end=False):
        if not self.strengthen:
            return
        mb, last = self.mb, len(path) - 1
        for a, (t, xs, ys, _, ims, _, M) in enumerate(path):
            if t == self.inst.T - 1:
                continue
            for j in range(len(xs)):
                demand = 0.0
                for b in range(a + 1, last + 1):
                    demand += path[b][5][j]
                    if demand >= M[j]:
                        break
                    terms = [(xs[j], 1.0), (ims[j], -1.0), (ys[j], -demand)]
                    if b == last:
                        if a == 0 and skip_first_end:
                            terms.append((path[b][3][j], -1.0))
                    else:
                        terms.append((path[b][3][j], -1.0))
                    mb.add_constr(terms, LE, 0.0, f"cover_{t}_{j}_{path[b][0]}_{s}")

    def first_end_cut(self, first, *blocks):
        if not self.strengthen or first[0] == self.inst.T - 1:
            return
        t, xs, ys, _, ims, _, M = first
        tail = np.max([blk.sum(axis=0) for blk in blocks], axis=0)
        for j in range(len(xs)):
            if tail[j] < M[j]:
                self.mb.add_constr([(xs[j], 1.0), (ims[j], -1.0), (ys[j], -float(tail[j]))], LE, 0.0,
                                   f"cover_{t}_{j}_end")


def _initial_prev(state: SystemState):
    return [(float(state.inventory[j]), float(state.backlog[j]), float(state.pipeline[j]))
            for j in range(state.J)]


def build_deterministic(inst: MSlagInstance, state: SystemState, current_demand, future,
                        t: int = 0) -> MILPModel:
    """Single-scenario look-ahead model over periods ``t .. t + len(future)``.

    Period ``t`` faces the observed ``current_demand``; later periods face
    the rows of ``future`` (a :class:`Scenario` or ``(K, J)`` array).
    """
    block = _as_matrix(future).reshape(-1, inst.J)
    d = _check_inputs(inst, state, t, current_demand, [block])
    req = _requirement(state, d, block)
    bld = _Builder(inst, t, 1 + len(block))
    prev, first = bld.period(t, None, d, _initial_prev(state), 1.0, _link_bound(inst, t, req))
    if len(block):
        bld.chain(0, block, prev, 1.0, req, first)
        # the shared period's end-of-horizon cut is exact for a single scenario
        bld.first_end_cut(first, block)
    return bld.mb.build()


def build_two_stage(inst: MSlagInstance, state: SystemState, current_demand, scenarios,
                    t: int = 0) -> MILPModel:
    """Extensive form: shared period-``t`` decisions, per-scenario copies of later periods,
    scenario costs weighted ``1/|S|``."""
    blocks = [b.reshape(-1, inst.J) for b in _scenario_blocks(scenarios)]
    if not blocks:
        raise ValueError("scenario set is empty")
    d = _check_inputs(inst, state, t, current_demand, blocks)
    reqs = [_requirement(state, d, blk) for blk in blocks]
    first_req = np.max(reqs, axis=0)
    bld = _Builder(inst, t, 1 + len(blocks[0]))
    prev, first = bld.period(t, None, d, _initial_prev(state), 1.0, _link_bound(inst, t, first_req))
    w = 1.0 / len(blocks)
    for s, (blk, req) in enumerate(zip(blocks, reqs)):
        bld.chain(s, blk, prev, w, req, first)
    # surplus of the shared lot may serve another scenario, so only the
    # largest scenario demand bounds it
    bld.first_end_cut(first, *blocks)
    return bld.mb.build()


def build_perfect_information(inst: MSlagInstance, init_state: SystemState, truth) -> MILPModel:
    """Deterministic model over the full horizon with the realised demands."""
    D = _as_matrix(truth)
    if D.shape != (inst.T, inst.J):
        raise DimensionMismatch(f"truth has shape {D.shape}, expected {(inst.T, inst.J)}")
    return build_deterministic(inst, init_state, D[0], D[1:], t=0)


def extract_first_stage(model: MILPModel, solution: MILPSolution, t: int | None = None,
                        int_tol: float = 1e-6) -> Decision:
    """Read the current-period decision from an optimal solution.

    Setups within ``int_tol`` of an integer are rounded; production paired
    with a zero setup is snapped to zero and the product recorded in
    ``snapped``.
    """
    if solution.status != "optimal" or solution.x is None:
        raise NotOptimal(f"solution status is {solution.status!r}")
    if t is None:
        t = min(k[1] for k in model.var_index if k[3] is None)
    x = solution.x
    J = sum(1 for k in model.var_index if k[0] == "x" and k[1] == t and k[3] is None)
    prod, setup, inv, back = np.zeros(J), np.zeros(J, dtype=int), np.zeros(J), np.zeros(J)
    snapped = []
    for j in range(J):
        yv = x[model.col(("y", t, j, None))]
        yr = round(yv)
        if abs(yv - yr) > int_tol:
            raise NotOptimal(f"setup for product {j} is fractional ({yv})")
        setup[j] = int(yr)
        xv = max(0.0, float(x[model.col(("x", t, j, None))]))
        if setup[j] == 0 and xv != 0.0:
            snapped.append(j)
            xv = 0.0
        prod[j] = xv
        inv[j] = max(0.0, float(x[model.col(("ip", t, j, None))]))
        back[j] = max(0.0, float(x[model.col(("im", t, j, None))]))
    o = max(0.0, float(x[model.col(("o", t, None, None))]))
    return Decision(prod, setup, o, inv, back, tuple(snapped))
