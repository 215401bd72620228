"""Predictive distributions and shared estimator plumbing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import EmptyHistory, ForecastError

NORMAL = "normal"
LOGNORMAL1P = "lognormal1p"
NEGBIN = "negbin"


@dataclass(frozen=True, eq=False)
class ForecastDistribution:
    """Per-period, per-series marginals of shape ``(horizon, n_series)``.

    ``normal``: ``loc`` mean, ``scale`` standard deviation.
    ``lognormal1p``: ``log(1 + demand)`` is normal with ``loc``/``scale``;
    quantiles are floored at zero demand.
    ``negbin``: ``loc`` mean, ``scale`` dispersion (variance ``mu + alpha mu^2``).
    """

    family: str
    loc: np.ndarray
    scale: np.ndarray
    conditioning_step: int | None = None

    def __post_init__(self):
        loc = np.atleast_2d(np.asarray(self.loc, dtype=float))
        scale = np.broadcast_to(np.asarray(self.scale, dtype=float), loc.shape).copy()
        if self.family not in (NORMAL, LOGNORMAL1P, NEGBIN):
            raise ValueError(f"unknown family {self.family!r}")
        if loc.shape[0] < 1:
            raise ValueError("horizon must be at least one period")
        if self.family == NEGBIN:
            if np.any(scale <= 0):
                raise ValueError("negative-binomial dispersion must be positive")
        elif np.any(scale < 0):
            raise ValueError("standard deviations must be nonnegative")
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)

    @property
    def horizon(self) -> int:
        return self.loc.shape[0]

    def mean(self) -> np.ndarray:
        if self.family == LOGNORMAL1P:
            return np.expm1(self.loc + 0.5 * self.scale ** 2)
        return self.loc.copy()

    def median(self) -> np.ndarray:
        if self.family == NEGBIN:
            return self.quantile(0.5)
        if self.family == LOGNORMAL1P:
            return np.expm1(self.loc)
        return self.loc.copy()

    def std(self) -> np.ndarray:
        if self.family == NORMAL:
            return self.scale.copy()
        if self.family == NEGBIN:
            return np.sqrt(self.loc + self.scale * self.loc ** 2)
        s2 = self.scale ** 2
        return np.sqrt((np.exp(s2) - 1.0) * np.exp(2 * self.loc + s2))

    def quantile(self, rho: float) -> np.ndarray:
        return quantile(self, rho)


def quantile(dist: ForecastDistribution, rho: float) -> np.ndarray:
    """Marginal ``rho``-quantiles; negative-binomial quantiles are the smallest
    integer whose CDF reaches ``rho``."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if dist.family == NEGBIN:
        r = 1.0 / dist.scale
        q = stats.nbinom.ppf(rho, r, r / (r + dist.loc))
        return np.where(dist.loc > 0, q, 0.0)
    z = stats.norm.ppf(rho)
    q = dist.loc + z * dist.scale
    return np.expm1(np.maximum(q, 0.0)) if dist.family == LOGNORMAL1P else q


@dataclass(frozen=True, eq=False)
class SamplePaths:
    """Sampled futures of shape ``(n_paths, horizon, n_series)``."""

    paths: np.ndarray
    seed: int

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]


def path_rngs(seed: int, n_paths: int):
    """Independent generator per path, derived from ``(seed, path)``."""
    return [np.random.default_rng([int(seed), s]) for s in range(n_paths)]


def path_normals(seed: int, n_paths: int, shape) -> np.ndarray:
    return np.stack([g.standard_normal(shape) for g in path_rngs(seed, n_paths)])


def derive_seed(seed: int, *keys: int) -> int:
    """Stable 63-bit child seed for ``(seed, *keys)``."""
    words = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int((int(words[0]) << 31) ^ int(words[1]))


class BaseForecaster(BaseEstimator):
    """Common validation for forecasters operating on ``(n_periods, n_series)`` arrays."""

    def _validate_fit(self, X, min_length=2):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        X = check_array(X, dtype=float, ensure_min_samples=min_length)
        if np.any(X < 0):
            raise ForecastError("demand must be nonnegative")
        return X

    def _validate_history(self, history, horizon):
        check_is_fitted(self)
        h = np.asarray(history, dtype=float)
        if h.size == 0:
            raise EmptyHistory("history is empty")
        if h.ndim == 1:
            h = h.reshape(-1, 1) if self.n_series_ == 1 else h.reshape(1, -1)
        if h.shape[1] != self.n_series_:
            raise ForecastError(f"history has {h.shape[1]} series, model has {self.n_series_}")
        if int(horizon) < 1:
            raise ValueError("horizon must be at least one period")
        return h

    def _step(self, history) -> int:
        return len(history) - self.n_train_

    def predict(self, history, horizon, covariates=None):
        """Conditional mean path of shape ``(horizon, n_series)``."""
        return self.predict_distribution(history, horizon, covariates).mean()

    def predict_median(self, history, horizon, covariates=None):
        return self.predict_distribution(history, horizon, covariates).median()

    def quantile(self, history, horizon, rho, covariates=None):
        return quantile(self.predict_distribution(history, horizon, covariates), rho)

    def noise_scaled(self, factor: float):
        """Copy whose predictive noise is multiplied by ``factor``."""
        raise NotImplementedError(f"{type(self).__name__} has no scalable noise")
