import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from forecast_msp.forecast import AR1Forecaster, OracleForecaster
from forecast_msp.scenario import (EXPECTED, SAMPLED, WORST_CASE, Scenario, ScenarioSet, expected_scenario,
                                   read_scenarios, sample_scenario_set, worst_case_scenario, write_scenarios)
from test_forecast import ar1


def test_memoryless_expected_scenario():
    sc = expected_scenario(ar1(0.0, 12, 3), [40.0], 4)
    assert sc.label == EXPECTED
    np.testing.assert_array_equal(sc.demands, np.full((4, 1), 12.0))


def test_expected_scenario_values():
    np.testing.assert_allclose(expected_scenario(ar1(0.5, 10, 1), [20.0], 2).demands[:, 0], [15, 12.5])


def test_negative_mean_clamped():
    # phi < 0 overshoots below zero from a high observation
    sc = expected_scenario(ar1(-0.8, 2, 1), [20.0], 2)
    assert sc.demands[0, 0] == 0.0
    assert sc.demands[1, 0] > 0


def test_noiseless_scenarios_match_expected():
    m = ar1(0.5, 10, 0)
    sset = sample_scenario_set(m, [20.0], 3, 9, seed=1)
    assert len(sset) == 9 and sset.seed == 1
    for sc in sset.scenarios:
        assert sc.label == SAMPLED
        np.testing.assert_array_equal(sc.demands, expected_scenario(m, [20.0], 3).demands)


def test_negative_draws_stored_as_zero():
    m = ar1(0.0, 0.5, 2)
    raw = m.sample_paths([1.0], 5, 30, seed=4).paths
    assert raw.min() < 0
    sset = sample_scenario_set(m, [1.0], 5, 30, seed=4)
    np.testing.assert_array_equal(sset.as_array(), np.maximum(raw, 0))


@pytest.mark.parametrize("count", [9, 15])
def test_preset_counts(count):
    sset = sample_scenario_set(ar1(0.5, 10, 1), [20.0], 4, count, seed=0)
    assert len(sset) == count
    assert sset.probabilities.sum() == pytest.approx(1.0)


def test_sample_mean_converges_to_expected():
    m = ar1(0.5, 50, 2)
    arr = sample_scenario_set(m, [60.0], 3, 10000, seed=7).as_array()[:, :, 0]
    se = arr.std(axis=0, ddof=1) / np.sqrt(len(arr))
    assert np.all(np.abs(arr.mean(axis=0) - expected_scenario(m, [60.0], 3).demands[:, 0]) <= 3 * se)


def test_worst_case_value():
    sc = worst_case_scenario(ar1(0.0, 10, 1), [10.0], 3, confidence=0.9)
    assert sc.label == WORST_CASE
    np.testing.assert_allclose(sc.demands, 11.6449, atol=1e-3)


def test_one_sided_variant():
    sc = worst_case_scenario(ar1(0.0, 10, 1), [10.0], 1, confidence=0.9, one_sided=True)
    assert sc.demands[0, 0] == pytest.approx(11.2816, abs=1e-3)


def test_worst_case_without_noise_is_expected():
    m = ar1(0.7, 10, 0)
    np.testing.assert_array_equal(worst_case_scenario(m, [30.0], 4).demands,
                                  expected_scenario(m, [30.0], 4).demands)


def test_higher_confidence_dominates():
    m = ar1(0.6, 20, 4)
    hi = worst_case_scenario(m, [25.0], 5, 0.9).demands
    lo = worst_case_scenario(m, [25.0], 5, 0.5).demands
    assert np.all(hi >= lo)


def test_worst_case_rejects_confidence():
    with pytest.raises(ValueError):
        worst_case_scenario(ar1(0.5, 10, 1), [1.0], 2, confidence=1.0)


@given(st.floats(-0.95, 0.95), st.floats(0, 100), st.floats(0, 10), st.floats(0, 100), st.floats(0.01, 0.99))
def test_worst_case_dominates_expected(phi, gamma, sigma, last, conf):
    m = ar1(phi, gamma, sigma)
    assert np.all(worst_case_scenario(m, [last], 4, conf).demands >= expected_scenario(m, [last], 4).demands)


@given(st.integers(0, 2 ** 32), st.integers(1, 6))
def test_scenarios_nonnegative_and_seeded(seed, horizon):
    m = ar1(0.3, 2, 5)
    a = sample_scenario_set(m, [3.0], horizon, 5, seed)
    assert np.all(a.as_array() >= 0) and np.all(np.isfinite(a.as_array()))
    assert a == sample_scenario_set(m, [3.0], horizon, 5, seed)


def test_scenario_rejects_negative():
    with pytest.raises(ValueError):
        Scenario([[1.0, -0.5]])
    with pytest.raises(ValueError):
        ScenarioSet(())


def test_oracle_scenarios_are_truth():
    full = np.arange(20.0).reshape(10, 2)
    m = OracleForecaster(series=full).fit(full[:5])
    sset = sample_scenario_set(m, full[:5], 3, 4, seed=0)
    for sc in sset.scenarios:
        np.testing.assert_array_equal(sc.demands, full[5:8])


def test_csv_round_trip(tmp_path):
    m = AR1Forecaster().fit(np.abs(np.random.default_rng(0).normal(10, 3, (30, 2))))
    sset = sample_scenario_set(m, np.full((1, 2), 9.0), 4, 6, seed=2)
    write_scenarios(sset, tmp_path / "s.csv", ["a", "b"])
    back = read_scenarios(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.as_array(), sset.as_array())


def test_read_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_scenarios(tmp_path / "nope.csv")
