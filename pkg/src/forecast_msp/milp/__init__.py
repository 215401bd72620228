"""LP and MILP solving for compiled lot-sizing models."""

from .branch_and_bound import NODE_LIMIT, TIME_LIMIT, MILPSolution, solve_milp
from .problem import EQ, GE, LE, MILPModel, ModelBuilder, from_arrays
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LPSolution, solve_lp

__all__ = [
    "EQ", "GE", "LE", "INFEASIBLE", "NODE_LIMIT", "OPTIMAL", "TIME_LIMIT", "UNBOUNDED",
    "LPSolution", "MILPModel", "MILPSolution", "ModelBuilder", "from_arrays",
    "solve_lp", "solve_milp",
]
