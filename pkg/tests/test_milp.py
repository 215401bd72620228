import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from forecast_msp.milp import (EQ, GE, LE, INFEASIBLE, NODE_LIMIT, OPTIMAL, UNBOUNDED, ModelBuilder, from_arrays,
                               solve_lp, solve_milp)
from forecast_msp.milp.io import lp_string, mps_string, write_lp, write_mps
from forecast_msp.model import SystemState, build_deterministic, build_two_stage
from oracles import enumerate_binaries, highs_lp, highs_milp


def lp_value(model):
    sol = solve_lp(model)
    return sol.objective if sol.status == OPTIMAL else None


def random_mslag(seed):
    rng = np.random.default_rng(seed)
    T, J = [(2, 2), (3, 2), (4, 2), (3, 3), (2, 3), (4, 1)][seed % 6]
    inst = random_instance(rng, T, J)
    D = rng.uniform(0, 8, (T, J))
    return build_deterministic(inst, SystemState(rng.uniform(0, 2, J), np.zeros(J), np.zeros(J)), D[0], D[1:])


def knapsack(seed, n=10):
    rng = np.random.default_rng(seed)
    value = rng.integers(5, 40, n).astype(float)
    weight = rng.integers(3, 20, n).astype(float)
    cap = float(weight.sum() // 2)
    return value, weight, cap, from_arrays(-value, A_ub=[weight], b_ub=[cap], ub=1.0, binary=np.ones(n, bool))


# LP

def test_one_variable_lp():
    sol = solve_lp(from_arrays([-1.0], A_ub=[[1.0]], b_ub=[5.0]))
    assert sol.status == OPTIMAL
    assert sol.objective == -5.0 and sol.x[0] == 5.0


def test_lp_on_a_face():
    sol = solve_lp(from_arrays([-1.0, -1.0], A_ub=[[1.0, 1.0]], b_ub=[1.0], ub=1.0))
    assert sol.objective == pytest.approx(-1.0)
    assert sol.x.sum() == pytest.approx(1.0)


def test_lp_infeasible():
    b = ModelBuilder()
    x = b.add_var("x")
    b.add_constr([(x, 1.0)], GE, 2.0)
    b.add_constr([(x, 1.0)], LE, 1.0)
    assert solve_lp(b.build()).status == INFEASIBLE


def test_lp_unbounded():
    assert solve_lp(from_arrays([-1.0, 0.0], A_ub=[[1.0, -1.0]], b_ub=[1.0])).status == UNBOUNDED


def test_negative_bounds():
    b = ModelBuilder()
    x = b.add_var("x", lb=-20.0, cost=1.0)
    y = b.add_var("y", lb=-3.0, ub=-1.0, cost=-1.0)
    b.add_constr([(x, 1.0), (y, 1.0)], GE, -10.0)
    sol = solve_lp(b.build())
    assert sol.objective == pytest.approx(-9 + 1)
    assert sol.x.tolist() == pytest.approx([-9.0, -1.0])


def test_free_variables_rejected():
    with pytest.raises(ValueError):
        solve_lp(from_arrays([1.0], lb=-np.inf))


def test_equality_rows_and_constant():
    b = ModelBuilder()
    x, y = b.add_var("x", cost=2.0), b.add_var("y", cost=3.0)
    b.add_constr([(x, 1.0), (y, 1.0)], EQ, 4.0)
    b.add_constr([(x, 1.0)], LE, 1.5)
    model = b.build()
    sol = solve_lp(model)
    assert sol.objective == pytest.approx(2 * 1.5 + 3 * 2.5)


@settings(max_examples=40)
@given(st.integers(0, 10 ** 6))
def test_lp_matches_highs(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(2, 8), rng.integers(2, 8)
    A = rng.normal(size=(m, n)).round(2)
    model = from_arrays(rng.normal(size=n).round(2), A_ub=A, b_ub=rng.uniform(0, 5, m).round(2),
                        ub=rng.uniform(1, 4, n).round(2))
    sol = solve_lp(model)
    ref = highs_lp(model)
    assert sol.status == OPTIMAL and ref is not None
    assert sol.objective == pytest.approx(ref, abs=1e-7)
    assert model.max_violation(sol.x) <= 1e-7
    assert model.objective(sol.x) == pytest.approx(sol.objective, abs=1e-7)


def test_degenerate_lp():
    # many redundant rows through the optimum
    rows = [[1.0, 1.0]] * 6 + [[1.0, 0.0], [0.0, 1.0]]
    sol = solve_lp(from_arrays([-1.0, -1.0], A_ub=rows, b_ub=[2.0] * 6 + [1.0, 1.0]))
    assert sol.objective == pytest.approx(-2.0)


# MILP

def test_pure_lp_uses_one_node():
    model = from_arrays([-1.0, -2.0], A_ub=[[1.0, 1.0]], b_ub=[3.0], ub=2.0)
    sol = solve_milp(model)
    assert sol.nodes == 1
    assert sol.objective == pytest.approx(solve_lp(model).objective)


@pytest.mark.parametrize("seed", range(5))
def test_knapsack_matches_enumeration(seed):
    value, weight, cap, model = knapsack(seed)
    best = max(value @ bits for bits in map(np.array, itertools.product((0, 1), repeat=10))
               if weight @ bits <= cap)
    assert solve_milp(model).objective == -best


def test_node_limit():
    value, weight, cap, model = knapsack(0)
    assert solve_lp(model).x is not None
    sol = solve_milp(model, node_limit=1)
    assert sol.status == NODE_LIMIT
    assert sol.nodes == 1
    assert sol.best_bound <= solve_milp(model).objective + 1e-9


def test_infeasible_milp():
    model = from_arrays([1.0, 1.0], A_ub=[[-1.0, -1.0]], b_ub=[-1.5], ub=1.0, binary=[True, False])
    # x0 + x1 >= 1.5 needs x0 = 1, which the bounds forbid
    model = model.with_bounds([0.0, 0.0], [0.0, 1.0])
    assert solve_milp(model).status == INFEASIBLE


@pytest.mark.parametrize("seed", range(50))
def test_matches_binary_enumeration(seed):
    model = random_mslag(seed)
    assert model.n_binaries <= 14
    sol = solve_milp(model)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(enumerate_binaries(model, lp_value), abs=1e-6)
    assert sol.objective == pytest.approx(highs_milp(model), abs=1e-6)


@settings(max_examples=25)
@given(st.integers(0, 10 ** 6))
def test_bound_sandwich_and_relaxation(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 4, 2)
    D = rng.uniform(0, 8, (4, 2))
    model = build_two_stage(inst, SystemState.zeros(2), D[0], rng.uniform(0, 8, (2, 3, 2)))
    sol = solve_milp(model, trace=True)
    opt = sol.objective
    assert all(bound <= opt + 1e-9 and opt <= inc + 1e-9 for bound, inc in sol.trace)
    assert sol.best_bound <= opt + 1e-9
    assert solve_lp(model).objective <= opt + 1e-9
    assert np.all(np.abs(sol.x[model.binary] - np.round(sol.x[model.binary])) <= 1e-6)
    assert model.max_violation(sol.x) <= 1e-6


def test_deterministic_repeats():
    model = random_mslag(7)
    a, b = solve_milp(model), solve_milp(model)
    assert (a.status, a.objective, a.nodes) == (b.status, b.objective, b.nodes)
    assert a.x.tobytes() == b.x.tobytes()


def test_gap_within_tolerance():
    sol = solve_milp(random_mslag(3))
    assert abs(sol.objective - sol.best_bound) <= 1e-6


# export

def test_mps_layout():
    _, _, _, model = knapsack(1, n=3)
    text = mps_string(model, "KS")
    assert text.startswith("NAME")
    for section in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert f"\n{section}" in text
    assert "'INTORG'" in text and "'INTEND'" in text
    assert text.count(" BV BND ") == 3


def test_lp_layout():
    _, _, _, model = knapsack(1, n=3)
    text = lp_string(model)
    for section in ("Minimize", "Subject To", "Bounds", "Binary", "End"):
        assert section in text


@pytest.mark.parametrize("writer,ext,tol", [(write_mps, "mps", 1e-8), (write_lp, "lp", 1e-9)])
@pytest.mark.parametrize("seed", range(3))
def test_export_round_trip(tmp_path, writer, ext, tol, seed):
    highspy = pytest.importorskip("highspy")
    model = random_mslag(seed)
    path = tmp_path / f"m.{ext}"
    writer(model, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    ref = solve_milp(model).objective
    assert h.getInfo().objective_function_value == pytest.approx(ref, rel=tol, abs=tol)
