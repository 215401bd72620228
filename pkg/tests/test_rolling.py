import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance
from forecast_msp.dataset import generate_instance_params, simulate_ar1, split_train_truth
from forecast_msp.exceptions import InvalidConfig, TooFewPeriods
from forecast_msp.forecast import AR1Forecaster, OracleForecaster
from forecast_msp.model import Decision, SystemState
from forecast_msp.rolling import (DETERMINISTIC, ROBUST, TWO_STAGE, PolicyConfig, advance_state, partition_periods,
                                  perfect_information_cost, period_cost, run_rolling_horizon)
from test_forecast import ar1


def setup_case(seed, T=4, J=2, gen=None):
    data = simulate_ar1(J, 40 + T, 0.7, 10, 2, seed=seed, horizon_start=40)
    inst = generate_instance_params(data, {"periods": T, "setup_ratio": 1, "capacity_ratio": 2.5, **(gen or {})},
                                    seed=seed)
    train, truth = split_train_truth(data, T)
    return data, inst, train.values, truth.demands


class Recorder(AR1Forecaster):
    """AR(1) forecaster that logs the history lengths it is conditioned on."""

    def predict_distribution(self, history, horizon, covariates=None):
        self.seen_.append((len(history), int(horizon)))
        return super().predict_distribution(history, horizon, covariates)

    def sample_paths(self, history, horizon, n_paths, seed, covariates=None):
        self.seen_.append((len(history), int(horizon)))
        return super().sample_paths(history, horizon, n_paths, seed, covariates)


# partition

def test_partition_example():
    assert partition_periods([3, 4, 5, 6, 7], 3) == [[3], [4, 5], [6, 7]]


def test_partition_single_stage():
    assert partition_periods(range(4), 1) == [[0, 1, 2, 3]]


def test_partition_singletons():
    assert partition_periods(range(4), 4) == [[0], [1], [2], [3]]


def test_partition_too_few():
    with pytest.raises(TooFewPeriods):
        partition_periods([1, 2], 3)


@given(st.integers(1, 30), st.integers(1, 30))
def test_partition_contract(n, k):
    if k > n:
        return
    parts = partition_periods(range(10, 10 + n), k)
    assert len(parts) == k and all(parts)
    assert sum(parts, []) == list(range(10, 10 + n))
    assert parts[0] == ([10] if k > 1 else list(range(10, 10 + n)))
    sizes = [len(p) for p in parts[1:]]
    assert sizes == sorted(sizes, reverse=True) and (not sizes or sizes[0] - sizes[-1] <= 1)


# state recursion

def test_advance_from_zero():
    inst = make_instance(2, 1)
    state, cost = advance_state(SystemState.zeros(1), Decision.idle(1), [0.0], inst, 0)
    assert state.inventory[0] == state.backlog[0] == state.pipeline[0] == 0
    assert cost == 0


def test_advance_with_arrival():
    state, _ = advance_state(SystemState([3.0], [0.0], [4.0]), Decision.idle(1), [5.0])
    assert (state.inventory[0], state.backlog[0]) == (2.0, 0.0)


def test_advance_into_backlog():
    inst = make_instance(2, 1, backlog=5, holding=1)
    state, cost = advance_state(SystemState.zeros(1), Decision.idle(1), [5.0], inst, 0)
    assert state.backlog[0] == 5.0
    assert cost == 25.0


def test_period_cost_components():
    inst = make_instance(2, 2, setup=50, backlog=5, holding=1, overtime_cost=2)
    dec = Decision(np.array([3.0, 0.0]), np.array([1, 0]), 1.5, np.zeros(2), np.zeros(2))
    state = SystemState([2.0, 0.0], [0.0, 4.0], [3.0, 0.0])
    assert period_cost(inst, 0, state, dec) == 2 * 1 + 4 * 5 + 50 + 1.5 * 2
    new, cost = advance_state(state, dec, [1.0, 1.0], inst, 1)
    assert new.pipeline.tolist() == [3.0, 0.0]


@given(st.lists(st.floats(0, 50), min_size=4, max_size=4))
def test_complementarity(vals):
    inv, back, pipe, d = vals
    state, _ = advance_state(SystemState([inv], [back], [pipe]), Decision.idle(1), [d])
    assert state.inventory[0] * state.backlog[0] == 0
    assert state.inventory[0] - state.backlog[0] == pytest.approx(inv - back + pipe - d)


# configuration

def test_policy_presets():
    assert PolicyConfig(DETERMINISTIC).n_stages == 1
    assert PolicyConfig(TWO_STAGE).n_stages == 2
    with pytest.raises(InvalidConfig):
        PolicyConfig("minmax")
    with pytest.raises(InvalidConfig):
        PolicyConfig(ROBUST, n_stages=2)
    with pytest.raises(InvalidConfig):
        PolicyConfig.from_dict({"policy": DETERMINISTIC, "colour": 1})


# rolling horizon

@pytest.mark.parametrize("policy", [DETERMINISTIC, TWO_STAGE, ROBUST])
def test_oracle_attains_perfect_information(policy):
    data, inst, train, truth = setup_case(1)
    oracle = OracleForecaster(series=data.values).fit(train)
    trace = run_rolling_horizon(inst, truth, oracle, PolicyConfig(policy, n_scenarios=3), train)
    assert not trace.aborted
    assert trace.total_cost == pytest.approx(perfect_information_cost(inst, truth), abs=1e-6)


def test_noiseless_two_stage_matches_deterministic():
    data, inst, train, truth = setup_case(2)
    model = AR1Forecaster().fit(train).noise_scaled(0.0)
    det = run_rolling_horizon(inst, truth, model, PolicyConfig(DETERMINISTIC), train)
    two = run_rolling_horizon(inst, truth, model, PolicyConfig(TWO_STAGE, n_scenarios=4), train)
    assert det.costs.tolist() == pytest.approx(two.costs.tolist(), abs=1e-9)
    for a, b in zip(det.steps, two.steps):
        np.testing.assert_allclose(a.decision.production, b.decision.production, atol=1e-7)
        assert a.decision.setup.tolist() == b.decision.setup.tolist()


@settings(max_examples=10)
@given(st.integers(0, 10 ** 6), st.sampled_from([DETERMINISTIC, TWO_STAGE, ROBUST]))
def test_trace_invariants(seed, policy):
    data, inst, train, truth = setup_case(seed % 1000, T=4)
    model = AR1Forecaster().fit(train)
    trace = run_rolling_horizon(inst, truth, model, PolicyConfig(policy, n_scenarios=3, seed=seed), train)
    assert not trace.aborted
    assert trace.total_cost >= perfect_information_cost(inst, truth) - 1e-6
    assert trace.total_cost == sum(s.cost for s in trace.steps)
    for s in trace.steps:
        assert s.cost >= 0
        assert np.all(s.state.inventory * s.state.backlog == 0)
        assert np.all(s.state.inventory <= inst.inventory_cap[s.t] + 1e-6)
    # rerun from the stored decisions reproduces every state and cost
    state = SystemState.zeros(inst.J)
    for s in trace.steps:
        state, cost = advance_state(state, s.decision, truth[s.t], inst, s.t)
        assert cost == s.cost
        np.testing.assert_array_equal(state.inventory, s.state.inventory)


@pytest.mark.parametrize("policy", [DETERMINISTIC, TWO_STAGE, ROBUST])
def test_conditioning_alignment(policy):
    data, inst, train, truth = setup_case(3, T=5)
    rec = Recorder().fit(train)
    rec.seen_ = []
    trace = run_rolling_horizon(inst, truth, rec, PolicyConfig(policy, n_scenarios=2), train)
    # period t sees the training rows plus t + 1 truth rows and forecasts the rest
    assert rec.seen_ == [(len(train) + t + 1, 5 - t - 1) for t in range(4)]
    assert [s.observed for s in trace.steps] == [1, 2, 3, 4, 5]


def test_two_stage_is_seeded():
    data, inst, train, truth = setup_case(4)
    model = AR1Forecaster().fit(train)
    a = run_rolling_horizon(inst, truth, model, PolicyConfig(TWO_STAGE, n_scenarios=3, seed=5), train)
    b = run_rolling_horizon(inst, truth, model, PolicyConfig(TWO_STAGE, n_scenarios=3, seed=5), train)
    assert a.to_dict() == b.to_dict()


def test_solver_limit_aborts_with_partial_trace():
    for seed in range(30):
        data, inst, train, truth = setup_case(seed, T=5)
        model = AR1Forecaster().fit(train)
        trace = run_rolling_horizon(inst, truth, model, PolicyConfig(DETERMINISTIC, node_limit=1), train)
        if trace.aborted:
            break
    assert trace.aborted
    assert "period" in trace.error
    assert len(trace.steps) < inst.T


def test_zero_truth_costs_nothing():
    inst = make_instance(3, 1)
    trace = run_rolling_horizon(inst, np.zeros((3, 1)), ar1(0.0, 0.0, 0.0), PolicyConfig(), np.zeros((5, 1)))
    assert trace.total_cost == 0.0
    assert perfect_information_cost(inst, np.zeros((3, 1))) == pytest.approx(0.0, abs=1e-9)


def test_truth_shape_checked():
    inst = make_instance(3, 1)
    with pytest.raises(ValueError):
        run_rolling_horizon(inst, np.zeros((2, 1)), ar1(0, 0, 0), PolicyConfig(), np.zeros((5, 1)))
