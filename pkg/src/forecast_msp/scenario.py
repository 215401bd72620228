"""Scenario objects handed to the look-ahead models."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

EXPECTED = "expected"
WORST_CASE = "worst_case"
SAMPLED = "sampled"
TRUTH = "truth"


@dataclass(frozen=True, eq=False)
class Scenario:
    """Demand over future periods x products; nonnegative and finite."""

    demands: np.ndarray
    label: str = SAMPLED

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.demands, dtype=float))
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("scenario demands must be finite and nonnegative")
        object.__setattr__(self, "demands", d)

    @property
    def shape(self):
        return self.demands.shape

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.demands, other.demands)


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Equally weighted scenarios of a common shape."""

    scenarios: tuple
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.scenarios:
            raise ValueError("scenario set is empty")
        if len({s.shape for s in self.scenarios}) != 1:
            raise ValueError("scenarios differ in shape")

    def __len__(self):
        return len(self.scenarios)

    @property
    def probabilities(self) -> np.ndarray:
        return np.full(len(self), 1.0 / len(self))

    def as_array(self) -> np.ndarray:
        """Demands of shape ``(n_scenarios, periods, products)``."""
        return np.stack([s.demands for s in self.scenarios])

    def mean(self) -> np.ndarray:
        return self.as_array().mean(axis=0)

    def __eq__(self, other):
        if not isinstance(other, ScenarioSet):
            return NotImplemented
        return self.seed == other.seed and self.scenarios == other.scenarios


def expected_scenario(model, history, horizon, covariates=None) -> Scenario:
    """Conditional mean path, clamped at zero."""
    mean = model.predict_distribution(history, horizon, covariates).mean()
    return Scenario(np.maximum(mean, 0.0), EXPECTED)


def sample_scenario_set(model, history, horizon, count, seed, covariates=None) -> ScenarioSet:
    """``count`` ancestral sample paths with negative draws replaced by zero."""
    if int(count) < 1:
        raise ValueError("count must be at least one")
    paths = model.sample_paths(history, horizon, int(count), seed, covariates).paths
    paths = np.maximum(paths, 0.0)
    return ScenarioSet(tuple(Scenario(p, SAMPLED) for p in paths), int(seed))


def worst_case_scenario(model, history, horizon, confidence=0.9, covariates=None,
                        one_sided=False) -> Scenario:
    """Per-period upper quantile: level ``(1 + confidence) / 2`` (the top of
    the central interval), or ``confidence`` itself when ``one_sided``."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    level = confidence if one_sided else 0.5 * (1.0 + confidence)
    q = model.predict_distribution(history, horizon, covariates).quantile(level)
    return Scenario(np.maximum(q, 0.0), WORST_CASE)


def write_scenarios(scenarios, path, product_ids=None) -> None:
    """CSV with columns ``scenario, t, product, demand`` (``t`` counts from 0)."""
    items = scenarios.scenarios if isinstance(scenarios, ScenarioSet) else (scenarios,)
    rows = []
    for s, sc in enumerate(items):
        T, J = sc.shape
        ids = list(product_ids) if product_ids is not None else list(range(J))
        for t in range(T):
            for j in range(J):
                rows.append((s, t, ids[j], sc.demands[t, j]))
    frame = pd.DataFrame(rows, columns=["scenario", "t", "product", "demand"])
    frame.to_csv(path, index=False, float_format="%.17g")


def read_scenarios(path, label: str = SAMPLED) -> ScenarioSet:
    """Inverse of :func:`write_scenarios`; products keep their file order."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    df = pd.read_csv(path, dtype={"product": str}, float_precision="round_trip")
    missing = {"scenario", "t", "product", "demand"} - set(df.columns)
    if missing:
        raise ValueError(f"scenario file lacks columns {sorted(missing)}")
    products = list(dict.fromkeys(df["product"]))
    out = []
    for _, grp in df.groupby("scenario", sort=True):
        wide = grp.pivot(index="t", columns="product", values="demand")[products]
        out.append(Scenario(wide.to_numpy(dtype=float), label))
    return ScenarioSet(tuple(out))
