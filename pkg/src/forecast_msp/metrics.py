"""Forecast accuracy and policy quality measures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DimensionMismatch, ZeroDenominator, ZeroPIBound

PI_TOL = 1e-9
DEFAULT_RHOS = (0.5, 0.9)


def nd(truth, predicted) -> float:
    """Normalized deviation: total absolute error over total absolute demand."""
    D = np.asarray(getattr(truth, "demands", truth), dtype=float)
    P = np.asarray(predicted, dtype=float)
    if D.shape != P.shape:
        raise DimensionMismatch(f"truth {D.shape} and prediction {P.shape} differ")
    denom = np.abs(D).sum()
    if denom == 0:
        raise ZeroDenominator("truth demand is identically zero")
    return float(np.abs(D - P).sum() / denom)


# Scalar formulas run in decimal on the shortest repr of their inputs, so
# 1 - 0.9 or 116.8 - 100 carry no binary representation error.
def _dec(v) -> Decimal:
    return Decimal(repr(float(v)))


def _loss(rho: Decimal, Z, Z_hat) -> Decimal:
    diff = _dec(Z_hat) - _dec(Z)
    return 2 * diff * (rho if diff > 0 else rho - 1)


def rho_risk_product(rho: float, Z: float, Z_hat: float) -> float:
    """Quantile loss ``2 (Z_hat - Z) (rho [Z_hat > Z] - (1 - rho) [Z_hat <= Z])``."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    return float(_loss(_dec(rho), Z, Z_hat))


def rho_risk_aggregate(rho: float, pairs) -> float:
    """Summed per-product losses over summed realized totals; ``pairs`` yields ``(Z, Z_hat)``."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    pairs = list(pairs)
    total = sum((_dec(z) for z, _ in pairs), Decimal(0))
    if total <= 0:
        raise ZeroDenominator("realized demand totals sum to zero")
    loss = sum((_loss(_dec(rho), z, zh) for z, zh in pairs), Decimal(0))
    return float(loss / total)


def gap_percent(policy_cost: float, pi_cost: float, tol: float = PI_TOL) -> float:
    if pi_cost <= tol:
        raise ZeroPIBound(f"perfect-information cost {pi_cost} is not positive")
    return float(100 * (_dec(policy_cost) - _dec(pi_cost)) / _dec(pi_cost))


def nd_row(model, train, truth, covariates=None) -> list[float]:
    """ND of the median forecast made after observing ``truth[:k]``, for every ``k``.

    Entry ``k`` conditions on the training data plus the first ``k`` realized
    periods and scores the remaining ``T - k``.  Returns NaN where the
    remaining truth is all zero.
    """
    train = np.asarray(getattr(train, "values", train), dtype=float)
    D = np.asarray(getattr(truth, "demands", truth), dtype=float)
    row = []
    for k in range(len(D)):
        history = np.vstack([train, D[:k]])
        pred = model.predict_median(history, len(D) - k, covariates)
        try:
            row.append(nd(D[k:], pred))
        except ZeroDenominator:
            row.append(float("nan"))
    return row


def rho_risks(model, train, truth, rhos=DEFAULT_RHOS, n_paths: int = 1000, seed: int = 0,
              covariates=None) -> dict:
    """Aggregate rho-risk of the predicted totals over the whole truth window.

    Quantiles of the total are taken over sampled path sums, since marginal
    quantiles do not add up.
    """
    train = np.asarray(getattr(train, "values", train), dtype=float)
    D = np.asarray(getattr(truth, "demands", truth), dtype=float)
    sums = model.sample_paths(train, len(D), n_paths, seed, covariates).paths.sum(axis=1)
    Z = D.sum(axis=0)
    out = {}
    for rho in rhos:
        Z_hat = np.quantile(sums, rho, axis=0)
        out[_key(rho)] = rho_risk_aggregate(rho, zip(Z, Z_hat))
    return out


def _key(rho) -> str:
    return f"{float(rho):g}"


@dataclass
class MetricReport:
    """ND rows per method, rho-risk per method and level, Gap% per run."""

    nd: dict = field(default_factory=dict)
    rho_risk: dict = field(default_factory=dict)
    gap_percent: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"nd": self.nd, "rho_risk": self.rho_risk, "gap_percent": self.gap_percent,
                "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(d.get("nd", {}), d.get("rho_risk", {}), d.get("gap_percent", {}),
                   d.get("metadata", {}))

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2) + "\n"

    def write_json(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def read_json(cls, path) -> "MetricReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def nd_frame(self) -> pd.DataFrame:
        """Methods as rows, conditioning steps as columns."""
        width = max((len(v) for v in self.nd.values()), default=0)
        rows = {m: list(v) + [np.nan] * (width - len(v)) for m, v in sorted(self.nd.items())}
        frame = pd.DataFrame.from_dict(rows, orient="index", columns=[f"t{k}" for k in range(width)])
        frame.index.name = "method"
        return frame

    def write_nd_csv(self, path) -> None:
        self.nd_frame().to_csv(path, float_format="%.6f")

    def write_gap_csv(self, path) -> None:
        frame = pd.DataFrame(sorted(self.gap_percent.items()), columns=["run", "gap_percent"])
        frame.to_csv(path, index=False, float_format="%.6f")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj
