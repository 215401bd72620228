"""JSON save/load for fitted forecasters.

The document records the model class, its constructor parameters and every
fitted attribute.  Floats are written with ``repr`` precision so a reload is
bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .base import BaseForecaster
from .linear import (AR1Forecaster, MeanForecaster, MovingAverageForecaster, OracleForecaster,
                     ScaledForecaster)
from .rnn import RNNForecaster

FORMAT_VERSION = 1
MODEL_TYPES = {cls.__name__: cls for cls in (AR1Forecaster, MeanForecaster, MovingAverageForecaster,
                                             OracleForecaster, ScaledForecaster, RNNForecaster)}


def _encode(obj):
    if isinstance(obj, BaseForecaster):
        state = {k: v for k, v in vars(obj).items() if k.endswith("_") and not k.startswith("_")}
        return {"__model__": type(obj).__name__,
                "params": _encode(obj.get_params(deep=False)),
                "state": _encode(state)}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.reshape(-1).tolist(), "dtype": str(obj.dtype),
                "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"]).reshape(obj["shape"])
        if "__model__" in obj:
            try:
                cls = MODEL_TYPES[obj["__model__"]]
            except KeyError:
                raise ValueError(f"unknown model type {obj['__model__']!r}") from None
            model = cls(**_decode(obj["params"]))
            for k, v in _decode(obj["state"]).items():
                setattr(model, k, v)
            return model
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def dumps(model: BaseForecaster) -> str:
    doc = {"format_version": FORMAT_VERSION, "model": _encode(model)}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def loads(text: str) -> BaseForecaster:
    doc = json.loads(text)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
    return _decode(doc["model"])


def save_model(model: BaseForecaster, path) -> None:
    Path(path).write_text(dumps(model))


def load_model(path) -> BaseForecaster:
    return loads(Path(path).read_text())
