"""Rolling-horizon evaluation of look-ahead lot-sizing policies."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import InfeasibleState, InvalidConfig, NotOptimal, TooFewPeriods
from .forecast.base import derive_seed
from .milp import OPTIMAL, solve_milp
from .model import (STATE_TOL, Decision, MSlagInstance, SystemState, build_deterministic,
                    build_perfect_information, build_two_stage, extract_first_stage)
from .scenario import expected_scenario, sample_scenario_set, worst_case_scenario

DETERMINISTIC = "deterministic"
TWO_STAGE = "two_stage"
ROBUST = "robust"
POLICIES = (DETERMINISTIC, TWO_STAGE, ROBUST)


@dataclass
class PolicyConfig:
    """How the look-ahead model is formed at every period.

    ``n_periods`` (look-ahead length) of ``None`` means the whole remaining
    horizon.  ``n_stages`` of ``None`` selects the policy's preset: one stage
    for deterministic and robust, two for two-stage.
    """

    policy: str = DETERMINISTIC
    forecaster: str = ""
    n_scenarios: int = 9
    confidence: float = 0.9
    one_sided: bool = False
    n_periods: int | None = None
    n_stages: int | None = None
    seed: int = 0
    node_limit: int | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise InvalidConfig(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.n_stages is None:
            self.n_stages = 2 if self.policy == TWO_STAGE else 1
        if self.n_stages not in (1, 2):
            raise InvalidConfig("only one- and two-stage look-ahead models are supported")
        if self.n_stages == 2 and self.policy != TWO_STAGE:
            raise InvalidConfig(f"policy {self.policy!r} uses a single stage")
        if self.n_periods is not None and self.n_periods < self.n_stages:
            raise InvalidConfig("n_periods must be at least n_stages")
        if int(self.n_scenarios) < 1:
            raise InvalidConfig("n_scenarios must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise InvalidConfig("confidence must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None


@dataclass
class StepRecord:
    t: int
    observed: int
    decision: Decision
    state: SystemState
    cost: float
    status: str
    objective: float
    nodes: int

    def to_dict(self) -> dict:
        d = self.decision
        return {
            "t": self.t, "observed": self.observed, "cost": self.cost, "status": self.status,
            "objective": self.objective, "nodes": self.nodes,
            "production": d.production.tolist(), "setup": d.setup.tolist(), "overtime": d.overtime,
            "inventory": self.state.inventory.tolist(), "backlog": self.state.backlog.tolist(),
            "pipeline": self.state.pipeline.tolist(), "snapped": list(d.snapped),
        }


@dataclass
class PolicyTrace:
    """Implemented decisions, realised states and costs, one record per period.

    ``aborted`` is set when a look-ahead model could not be solved to
    optimality; the records then stop at the failing period.
    """

    steps: list = field(default_factory=list)
    aborted: bool = False
    error: str = ""

    @property
    def costs(self) -> np.ndarray:
        return np.array([s.cost for s in self.steps])

    @property
    def total_cost(self) -> float:
        return float(sum(s.cost for s in self.steps))

    def to_dict(self) -> dict:
        return {"total_cost": self.total_cost, "aborted": self.aborted, "error": self.error,
                "steps": [s.to_dict() for s in self.steps]}


def partition_periods(periods, n_stages: int) -> list[list]:
    """Split ordered ``periods`` into ``n_stages`` contiguous sets.

    The first set is the first period alone; the rest are shared as evenly
    as possible, earlier sets taking the remainder.
    """
    periods = list(periods)
    if n_stages < 1 or len(periods) < n_stages:
        raise TooFewPeriods(f"cannot split {len(periods)} periods into {n_stages} stages")
    if n_stages == 1:
        return [periods]
    out = [periods[:1]]
    rest = periods[1:]
    size, extra = divmod(len(rest), n_stages - 1)
    pos = 0
    for k in range(n_stages - 1):
        n = size + (1 if k < extra else 0)
        out.append(rest[pos:pos + n])
        pos += n
    return out


def period_cost(inst: MSlagInstance, t: int, state: SystemState, decision: Decision) -> float:
    return float(inst.holding_cost[t] @ state.inventory + inst.backlog_cost[t] @ state.backlog
                 + inst.setup_cost[t] @ decision.setup + inst.overtime_cost[t] * decision.overtime)


def advance_state(state: SystemState, decision: Decision, realized_demand,
                  inst: MSlagInstance | None = None, t: int = 0):
    """Apply one period of realised demand.

    Returns the new state and, when ``inst`` is given, the period cost.
    """
    d = np.asarray(realized_demand, dtype=float)
    if np.any(d < 0):
        raise ValueError("demand must be nonnegative")
    net = state.inventory - state.backlog + state.pipeline - d
    new = SystemState(np.maximum(net, 0.0), np.maximum(-net, 0.0),
                      np.asarray(decision.production, dtype=float).copy())
    cost = period_cost(inst, t, new, decision) if inst is not None else None
    return new, cost


def perfect_information_cost(inst: MSlagInstance, truth, init_state: SystemState | None = None,
                             node_limit: int | None = None) -> float:
    """Optimal cost of the full-horizon model solved with the realised demands."""
    state = init_state if init_state is not None else SystemState.zeros(inst.J)
    sol = solve_milp(build_perfect_information(inst, state, truth), node_limit=node_limit)
    if sol.status != OPTIMAL:
        raise NotOptimal(f"perfect-information model ended with status {sol.status!r}")
    return float(sol.objective)


def _look_ahead(inst, state, D, t, future, model, history, cfg, covariates):
    """Build the period-``t`` model for the configured policy."""
    if future == 0:
        return build_deterministic(inst, state, D[t], np.zeros((0, inst.J)), t)
    if cfg.policy == DETERMINISTIC:
        sc = expected_scenario(model, history, future, covariates)
        return build_deterministic(inst, state, D[t], sc, t)
    if cfg.policy == ROBUST:
        sc = worst_case_scenario(model, history, future, cfg.confidence, covariates, cfg.one_sided)
        return build_deterministic(inst, state, D[t], sc, t)
    scs = sample_scenario_set(model, history, future, cfg.n_scenarios, derive_seed(cfg.seed, t),
                              covariates)
    return build_two_stage(inst, state, D[t], scs, t)


def run_rolling_horizon(inst: MSlagInstance, truth, model, cfg: PolicyConfig, history,
                        init_state: SystemState | None = None, covariates=None) -> PolicyTrace:
    """Re-solve a look-ahead model every period and implement its first decision.

    At period ``t`` the forecaster is conditioned on ``history`` plus truth
    rows ``0..t`` and the model covers periods ``t`` to the end of the
    look-ahead window.  ``covariates``, when the forecaster needs them, are
    aligned with ``history`` followed by the horizon.
    """
    D = np.asarray(getattr(truth, "demands", truth), dtype=float)
    T = inst.T
    if D.shape != (T, inst.J):
        raise ValueError(f"truth has shape {D.shape}, expected {(T, inst.J)}")
    history = np.asarray(history, dtype=float).reshape(-1, inst.J)
    state = init_state if init_state is not None else SystemState.zeros(inst.J)
    trace = PolicyTrace()
    window = cfg.n_periods or T
    for t in range(T):
        periods = list(range(t, min(t + window, T)))
        partition_periods(periods, min(cfg.n_stages, len(periods)))
        future = len(periods) - 1
        observed = np.vstack([history, D[:t + 1]])
        try:
            mip = _look_ahead(inst, state, D, t, future, model, observed, cfg, covariates)
            sol = solve_milp(mip, node_limit=cfg.node_limit)
            decision = extract_first_stage(mip, sol, t)
        except (NotOptimal, InfeasibleState) as exc:
            trace.aborted, trace.error = True, f"period {t}: {exc}"
            break
        state, cost = advance_state(state, decision, D[t], inst, t)
        if np.any(state.inventory > inst.inventory_cap[t] + 1e-5):
            raise RuntimeError(f"inventory capacity exceeded at period {t}")
        trace.steps.append(StepRecord(t, t + 1, decision, state, cost, sol.status,
                                      float(sol.objective), sol.nodes))
    return trace


def config_dict(cfg: PolicyConfig) -> dict:
    return asdict(cfg)


__all__ = [
    "DETERMINISTIC", "POLICIES", "ROBUST", "TWO_STAGE", "STATE_TOL", "PolicyConfig", "PolicyTrace",
    "StepRecord", "advance_state", "config_dict", "partition_periods", "perfect_information_cost",
    "period_cost", "run_rolling_horizon",
]
