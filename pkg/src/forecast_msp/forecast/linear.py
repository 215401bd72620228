"""AR(1), moving-average and reference forecasters."""

from __future__ import annotations

import copy
import warnings

import numpy as np
from sklearn.base import clone
from sklearn.utils.validation import check_is_fitted

from ..exceptions import NonStationaryFitWarning, WindowTooLarge
from .base import (LOGNORMAL1P, NORMAL, BaseForecaster, ForecastDistribution, SamplePaths,
                   path_normals)


def _ols_ar1(y: np.ndarray):
    """Least-squares fit of ``y[t] = c + phi * y[t-1] + e``; returns ``(phi, gamma, sigma)``."""
    if np.all(y == y[0]):
        return 0.0, float(y[0]), 0.0
    x, z = y[:-1], y[1:]
    xm, zm = x.mean(), z.mean()
    sxx = float(((x - xm) ** 2).sum())
    phi = float(((x - xm) * (z - zm)).sum() / sxx) if sxx > 0 else 0.0
    c = zm - phi * xm
    resid = z - c - phi * x
    dof = max(len(z) - 2, 1)
    sigma = float(np.sqrt((resid ** 2).sum() / dof))
    gamma = float(c / (1.0 - phi)) if abs(1.0 - phi) > 1e-12 else float(y.mean())
    return phi, gamma, sigma


class AR1Forecaster(BaseForecaster):
    """Per-series AR(1) model ``y[t] = phi y[t-1] + (1 - phi) gamma + eps``.

    Fitted by ordinary least squares with intercept.  A series whose slope
    reaches ``|phi| >= 1`` is flagged in ``nonstationary_`` and warned about.
    """

    def fit(self, X, y=None):
        X = self._validate_fit(X, min_length=3)
        params = np.array([_ols_ar1(X[:, j]) for j in range(X.shape[1])])
        self.phi_, self.gamma_, self.noise_std_ = params.T.copy()
        self.nonstationary_ = np.abs(self.phi_) >= 1.0
        if self.nonstationary_.any():
            warnings.warn(f"non-stationary AR(1) fit for series {np.flatnonzero(self.nonstationary_).tolist()}",
                          NonStationaryFitWarning, stacklevel=2)
        self.n_series_ = X.shape[1]
        self.n_train_ = X.shape[0]
        return self

    def predict_distribution(self, history, horizon, covariates=None):
        h = self._validate_history(history, horizon)
        k = np.arange(1, int(horizon) + 1)[:, None]
        phi, gamma = self.phi_[None, :], self.gamma_[None, :]
        mean = gamma + phi ** k * (h[-1] - gamma)
        # sum_{i<k} phi^{2i}, written as a cumulative sum to stay exact at |phi| = 1
        powers = np.cumsum(phi ** (2 * (k - 1)), axis=0)
        std = self.noise_std_[None, :] * np.sqrt(powers)
        return ForecastDistribution(NORMAL, mean, std, self._step(h))

    def sample_paths(self, history, horizon, n_paths, seed, covariates=None):
        h = self._validate_history(history, horizon)
        eps = path_normals(seed, int(n_paths), (int(horizon), self.n_series_))
        out = np.empty_like(eps)
        prev = np.broadcast_to(h[-1], (int(n_paths), self.n_series_))
        for k in range(int(horizon)):
            prev = self.phi_ * prev + (1.0 - self.phi_) * self.gamma_ + self.noise_std_ * eps[:, k]
            out[:, k] = prev
        return SamplePaths(out, int(seed))

    def noise_scaled(self, factor):
        check_is_fitted(self)
        other = copy.deepcopy(self)
        other.noise_std_ = self.noise_std_ * float(factor)
        return other


class MeanForecaster(AR1Forecaster):
    """Memoryless forecaster: every future period is the training mean plus
    noise with the training standard deviation."""

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        self.phi_ = np.zeros(X.shape[1])
        self.gamma_ = X.mean(axis=0)
        self.noise_std_ = X.std(axis=0, ddof=1)
        self.nonstationary_ = np.zeros(X.shape[1], dtype=bool)
        self.n_series_ = X.shape[1]
        self.n_train_ = X.shape[0]
        return self


class MovingAverageForecaster(BaseForecaster):
    """Forecast the average of the last ``window`` observations.

    With ``log_space=True`` averaging happens on ``log(1 + demand)`` and is
    mapped back through ``expm1``; sampled log values are floored at zero so
    draws stay nonnegative.  Multi-step forecasts feed predictions back
    into the window; the k-step variance is ``k * residual_std_**2`` in model
    space, where ``residual_std_`` is the root-mean-square one-step in-sample
    error.
    """

    def __init__(self, window=8, log_space=False):
        self.window = window
        self.log_space = log_space

    def _to_model(self, x):
        return np.log1p(x) if self.log_space else x

    def _from_model(self, z):
        return np.expm1(z) if self.log_space else z

    def fit(self, X, y=None):
        X = self._validate_fit(X, min_length=1)
        q = int(self.window)
        if q < 1:
            raise ValueError("window must be positive")
        if X.shape[0] < q + 1:
            raise WindowTooLarge(f"window {q} needs at least {q + 1} observations, got {X.shape[0]}")
        Z = self._to_model(X)
        csum = np.vstack([np.zeros(X.shape[1]), np.cumsum(Z, axis=0)])
        preds = (csum[q:-1] - csum[:-q - 1]) / q
        resid = Z[q:] - preds
        self.residual_std_ = np.sqrt((resid ** 2).mean(axis=0))
        self.n_series_ = X.shape[1]
        self.n_train_ = X.shape[0]
        return self

    def predict_distribution(self, history, horizon, covariates=None):
        h = self._validate_history(history, horizon)
        buf = list(self._to_model(h[-int(self.window):]))
        means = []
        for _ in range(int(horizon)):
            m = np.mean(buf[-int(self.window):], axis=0)
            means.append(m)
            buf.append(m)
        k = np.arange(1, int(horizon) + 1)[:, None]
        std = np.sqrt(k) * self.residual_std_[None, :]
        family = LOGNORMAL1P if self.log_space else NORMAL
        return ForecastDistribution(family, np.array(means), std, self._step(h))

    def sample_paths(self, history, horizon, n_paths, seed, covariates=None):
        h = self._validate_history(history, horizon)
        q = int(self.window)
        n_paths = int(n_paths)
        eps = path_normals(seed, n_paths, (int(horizon), self.n_series_))
        buf = np.repeat(self._to_model(h[-q:])[None], n_paths, axis=0)
        out = np.empty_like(eps)
        for k in range(int(horizon)):
            z = buf[:, -q:].mean(axis=1) + self.residual_std_ * eps[:, k]
            if self.log_space:
                z = np.maximum(z, 0.0)
            out[:, k] = z
            buf = np.concatenate([buf, z[:, None]], axis=1)
        return SamplePaths(self._from_model(out), int(seed))

    def noise_scaled(self, factor):
        check_is_fitted(self)
        other = copy.deepcopy(self)
        other.residual_std_ = self.residual_std_ * float(factor)
        return other


class OracleForecaster(BaseForecaster):
    """Returns the realised future with zero uncertainty.

    ``series`` holds the full demand matrix (training periods followed by
    the planning horizon); a history of length ``n`` is answered with rows
    ``n, n + 1, ...``.
    """

    def __init__(self, series=None):
        self.series = series

    def fit(self, X, y=None):
        X = self._validate_fit(X, min_length=1)
        self.series_ = np.asarray(self.series, dtype=float).reshape(-1, X.shape[1])
        self.n_series_ = X.shape[1]
        self.n_train_ = X.shape[0]
        return self

    def _future(self, n, horizon):
        fut = self.series_[n:n + int(horizon)]
        if len(fut) < int(horizon):
            raise ValueError("oracle asked beyond the stored series")
        return fut

    def predict_distribution(self, history, horizon, covariates=None):
        h = self._validate_history(history, horizon)
        fut = self._future(len(h), horizon)
        return ForecastDistribution(NORMAL, fut, np.zeros_like(fut), self._step(h))

    def sample_paths(self, history, horizon, n_paths, seed, covariates=None):
        h = self._validate_history(history, horizon)
        fut = self._future(len(h), horizon)
        return SamplePaths(np.repeat(fut[None], int(n_paths), axis=0), int(seed))

    def noise_scaled(self, factor):
        return self


class ScaledForecaster(BaseForecaster):
    """Wrap a forecaster and multiply its predictive noise by ``std_factor``."""

    def __init__(self, estimator=None, std_factor=0.5):
        self.estimator = estimator
        self.std_factor = std_factor

    def fit(self, X, y=None, covariates=None):
        base = clone(self.estimator)
        base = base.fit(X, covariates=covariates) if covariates is not None else base.fit(X)
        self.estimator_ = base.noise_scaled(self.std_factor)
        self.n_series_ = self.estimator_.n_series_
        self.n_train_ = self.estimator_.n_train_
        return self

    def predict_distribution(self, history, horizon, covariates=None):
        check_is_fitted(self)
        return self.estimator_.predict_distribution(history, horizon, covariates)

    def sample_paths(self, history, horizon, n_paths, seed, covariates=None):
        check_is_fitted(self)
        return self.estimator_.sample_paths(history, horizon, n_paths, seed, covariates)


def fit_ar1(series) -> AR1Forecaster:
    return AR1Forecaster().fit(getattr(series, "values", series))


def fit_ma(series, q: int = 8, log_space: bool = False) -> MovingAverageForecaster:
    return MovingAverageForecaster(window=q, log_space=log_space).fit(getattr(series, "values", series))
