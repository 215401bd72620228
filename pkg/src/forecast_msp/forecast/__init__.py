"""Probabilistic demand forecasters."""

from .base import (LOGNORMAL1P, NEGBIN, NORMAL, BaseForecaster, ForecastDistribution, SamplePaths,
                   derive_seed, quantile)
from .linear import (AR1Forecaster, MeanForecaster, MovingAverageForecaster, OracleForecaster,
                     ScaledForecaster, fit_ar1, fit_ma)
from .persistence import load_model, save_model
from .rnn import RNNForecaster, WindowBatch, rnn_gradient_check, rnn_train

FORECASTERS = {
    "ar1": AR1Forecaster,
    "mean": MeanForecaster,
    "ma": MovingAverageForecaster,
    "logma": lambda **kw: MovingAverageForecaster(log_space=True, **kw),
    "rnn": RNNForecaster,
}


def make_forecaster(name: str, **params) -> BaseForecaster:
    """Instantiate a forecaster from its short name."""
    try:
        factory = FORECASTERS[name]
    except KeyError:
        raise ValueError(f"unknown forecaster {name!r}; choose from {sorted(FORECASTERS)}") from None
    return factory(**params)


def predict_distribution(model, history, horizon, covariates=None) -> ForecastDistribution:
    return model.predict_distribution(history, horizon, covariates)


def sample_paths(model, history, horizon, count, seed, covariates=None) -> SamplePaths:
    return model.sample_paths(history, horizon, count, seed, covariates)


__all__ = [
    "AR1Forecaster", "BaseForecaster", "ForecastDistribution", "FORECASTERS", "LOGNORMAL1P",
    "MeanForecaster", "MovingAverageForecaster", "NEGBIN", "NORMAL", "OracleForecaster",
    "RNNForecaster", "SamplePaths", "ScaledForecaster", "WindowBatch", "derive_seed", "fit_ar1",
    "fit_ma", "load_model", "make_forecaster", "predict_distribution", "quantile", "rnn_gradient_check",
    "rnn_train", "sample_paths", "save_model",
]
