import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from forecast_msp.model import MSlagInstance

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")


def make_instance(T, J, *, setup=50.0, backlog=5.0, holding=1.0, capacity=100.0, overtime=0.0,
                  overtime_cost=2.0, inv_cap=np.inf, setup_time=0.0, unit_time=1.0, big_m=None):
    """Instance with the same parameters in every period and product."""
    full = lambda v: np.full((T, J), float(v))
    return MSlagInstance(
        setup_time=np.full(J, float(setup_time)), unit_time=np.full(J, float(unit_time)),
        capacity=np.full(T, float(capacity)), inventory_cap=full(inv_cap),
        overtime_cap=np.full(T, float(overtime)), setup_cost=full(setup), backlog_cost=full(backlog),
        holding_cost=full(holding), overtime_cost=np.full(T, float(overtime_cost)), big_m=big_m,
    )


def random_instance(rng, T, J, integral=False):
    """Small random instance; with ``integral`` every time and capacity is an integer
    and unit times are one, so optimal production is integral for integer demand."""
    if integral:
        unit = np.ones(J)
        setup_t = rng.integers(0, 4, J).astype(float)
        cap = rng.integers(4, 12, T).astype(float)
        otcap = rng.integers(0, 6, T).astype(float)
        inv = rng.integers(6, 14, (T, J)).astype(float)
    else:
        unit = rng.uniform(1, 2, J)
        setup_t = rng.uniform(0, 4, J)
        cap = rng.uniform(5, 20, T)
        otcap = rng.uniform(0, 10, T)
        inv = rng.uniform(5, 30, (T, J))
    return MSlagInstance(
        setup_time=setup_t, unit_time=unit, capacity=cap, inventory_cap=inv, overtime_cap=otcap,
        setup_cost=rng.uniform(5, 40, (T, J)).round(2), backlog_cost=rng.uniform(2, 8, (T, J)).round(2),
        holding_cost=rng.uniform(0.5, 2, (T, J)).round(2), overtime_cost=rng.uniform(1, 4, T).round(2),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
