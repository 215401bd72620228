import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from forecast_msp.exceptions import DimensionMismatch, ZeroDenominator, ZeroPIBound
from forecast_msp.metrics import (MetricReport, gap_percent, nd, nd_row, rho_risk_aggregate, rho_risk_product,
                                  rho_risks)
from test_forecast import ar1

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-3, 1e6)
prob = st.floats(0.001, 0.999)


def test_nd_perfect_forecast():
    assert nd([[3.0, 1.0], [2.0, 0.0]], [[3.0, 1.0], [2.0, 0.0]]) == 0.0


def test_nd_hand_case():
    assert nd([[10.0], [10.0]], [[8.0], [14.0]]) == 0.3


def test_nd_zero_truth():
    with pytest.raises(ZeroDenominator):
        nd(np.zeros((2, 2)), np.ones((2, 2)))


def test_nd_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        nd(np.ones((2, 2)), np.ones((3, 2)))


@given(st.lists(st.tuples(positive, st.floats(0, 1e6)), min_size=1, max_size=10), st.floats(1e-3, 1e3))
def test_nd_scale_invariant(rows, c):
    D, P = np.array(rows).T
    assert nd(c * D, c * P) == pytest.approx(nd(D, P), rel=1e-9)


def test_rho_risk_exact_hit():
    assert rho_risk_product(0.9, 10.0, 10.0) == 0.0


def test_rho_risk_over_prediction():
    assert rho_risk_product(0.9, 10, 12) == 3.6


def test_rho_risk_under_prediction():
    assert rho_risk_product(0.9, 10, 8) == 0.4


@given(prob, finite, finite)
def test_rho_risk_nonnegative(rho, z, zh):
    assert rho_risk_product(rho, z, zh) >= 0


def test_rho_risk_aggregate_hand_case():
    assert rho_risk_aggregate(0.9, [(10, 12), (10, 8)]) == 0.2


def test_rho_risk_aggregate_exact():
    assert rho_risk_aggregate(0.5, [(4.0, 4.0), (6.0, 6.0)]) == 0.0
    with pytest.raises(ZeroDenominator):
        rho_risk_aggregate(0.5, [(0.0, 1.0)])


@given(st.lists(st.tuples(positive, st.floats(0, 1e6)), min_size=1, max_size=8))
def test_median_risk_is_normalized_absolute_error(pairs):
    Z = np.array([p[0] for p in pairs])
    Zh = np.array([p[1] for p in pairs])
    assert rho_risk_aggregate(0.5, pairs) == pytest.approx(np.abs(Zh - Z).sum() / Z.sum(), rel=1e-9)


def test_gap_hand_cases():
    assert gap_percent(100.0, 100.0) == 0.0
    assert gap_percent(116.8, 100) == 16.8


def test_gap_zero_bound():
    with pytest.raises(ZeroPIBound):
        gap_percent(5.0, 0.0)


@given(st.floats(1e-3, 1e6), st.floats(0, 1e6), st.floats(0, 1e6))
def test_gap_monotone(pi, a, b):
    lo, hi = sorted((a, b))
    assert gap_percent(lo, pi) <= gap_percent(hi, pi)
    assert gap_percent(pi, pi) == 0


def test_nd_row_conditions_on_observed_truth():
    m = ar1(0.5, 10, 1)
    train = np.array([[12.0], [20.0]])
    truth = np.array([[15.0], [12.0], [9.0]])
    row = nd_row(m, train, truth)
    assert len(row) == 3
    assert row[0] == pytest.approx(nd(truth, [[15.0], [12.5], [11.25]]))
    assert row[1] == pytest.approx(nd(truth[1:], [[12.5], [11.25]]))
    assert row[2] == pytest.approx(nd(truth[2:], [[11.0]]))


def test_nd_row_marks_zero_tail():
    row = nd_row(ar1(0.0, 1, 1), np.ones((3, 1)), np.array([[2.0], [0.0]]))
    assert row[0] == pytest.approx(1.0) and math.isnan(row[1])


def test_rho_risks_with_noiseless_truth():
    m = ar1(0.5, 10, 0)
    out = rho_risks(m, np.array([[20.0]]), np.array([[15.0], [12.5]]), n_paths=50)
    assert out == {"0.5": 0.0, "0.9": 0.0}


def test_rho_risks_seeded():
    m = ar1(0.5, 10, 2)
    args = (m, np.array([[20.0]]), np.array([[14.0], [12.0]]))
    assert rho_risks(*args, seed=3) == rho_risks(*args, seed=3)


def test_report_json_round_trip(tmp_path):
    rep = MetricReport({"ar1": [0.1, float("nan")]}, {"ar1": {"0.9": 0.2}}, {"run": 3.5}, {"T": 2})
    rep.write_json(tmp_path / "m.json")
    back = MetricReport.read_json(tmp_path / "m.json")
    assert set(back.to_dict()) == {"nd", "rho_risk", "gap_percent", "metadata"}
    assert back.nd == {"ar1": [0.1, None]}
    assert back.rho_risk == rep.rho_risk and back.gap_percent == rep.gap_percent


def test_report_csv_layout(tmp_path):
    rep = MetricReport({"mean": [0.4, 0.3, 0.2], "ar1": [0.2, 0.1]})
    rep.write_nd_csv(tmp_path / "nd.csv")
    frame = pd.read_csv(tmp_path / "nd.csv", index_col="method")
    assert list(frame.columns) == ["t0", "t1", "t2"]
    assert list(frame.index) == ["ar1", "mean"]
    assert math.isnan(frame.loc["ar1", "t2"])
    rep.gap_percent = {"b": 1.0, "a": 2.0}
    rep.write_gap_csv(tmp_path / "gap.csv")
    assert pd.read_csv(tmp_path / "gap.csv")["run"].tolist() == ["a", "b"]
