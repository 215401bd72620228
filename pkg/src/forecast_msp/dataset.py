"""Demand time-series ingestion, train/truth splitting and instance generation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .exceptions import (HorizonOverrun, MissingColumn, MissingValue, NegativeDemand,
                         RaggedSeries)
from .model import MSlagInstance


@dataclass(frozen=True, eq=False)
class TimeSeries:
    id: str
    values: np.ndarray
    covariates: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or len(v) < 2:
            raise ValueError(f"series {self.id!r} needs at least two values")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~(v >= 0))[0])
            raise NegativeDemand(self.id, bad, v[bad])
        cov = {}
        for name, arr in self.covariates.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != v.shape:
                raise RaggedSeries(f"covariate {name!r} of series {self.id!r} has wrong length")
            cov[name] = arr
        object.__setattr__(self, "covariates", cov)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (self.id == other.id and np.array_equal(self.values, other.values)
                and self.covariates.keys() == other.covariates.keys()
                and all(np.array_equal(a, other.covariates[k]) for k, a in self.covariates.items()))


@dataclass(frozen=True, eq=False)
class TimeSeriesSet:
    """Series on a shared time index; ``horizon_start`` is the position of the
    first planning-horizon period (``None`` for pure training data)."""

    series: tuple
    horizon_start: int | None = None
    index: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        if not self.series:
            raise ValueError("empty series set")
        lengths = {len(s) for s in self.series}
        if len(lengths) != 1:
            raise RaggedSeries(f"series lengths differ: {sorted(lengths)}")
        n = lengths.pop()
        idx = np.arange(n) if self.index is None else np.asarray(self.index, dtype=int)
        if idx.shape != (n,):
            raise RaggedSeries("time index length differs from series length")
        object.__setattr__(self, "index", idx)
        if len({s.id for s in self.series}) != len(self.series):
            raise ValueError("duplicate series ids")
        names = {tuple(sorted(s.covariates)) for s in self.series}
        if len(names) != 1:
            raise RaggedSeries("series carry different covariate names")
        if self.horizon_start is not None and not 0 < self.horizon_start < n:
            raise ValueError(f"horizon_start must lie in (0, {n})")

    @property
    def ids(self) -> tuple:
        return tuple(s.id for s in self.series)

    @property
    def length(self) -> int:
        return len(self.series[0])

    @property
    def values(self) -> np.ndarray:
        """Demand matrix of shape ``(n_periods, n_series)``."""
        return np.column_stack([s.values for s in self.series])

    @property
    def covariate_names(self) -> tuple:
        return tuple(sorted(self.series[0].covariates))

    def covariate_array(self) -> np.ndarray | None:
        """Covariates of shape ``(n_periods, n_series, n_covariates)``, or ``None``."""
        names = self.covariate_names
        if not names:
            return None
        return np.stack([np.column_stack([s.covariates[k] for k in names]) for s in self.series],
                        axis=1)

    def select(self, ids) -> "TimeSeriesSet":
        by_id = {s.id: s for s in self.series}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise KeyError(f"unknown series ids {missing}")
        return TimeSeriesSet(tuple(by_id[i] for i in ids), self.horizon_start, self.index)

    def training(self) -> "TimeSeriesSet":
        """Series truncated before ``horizon_start`` (all of them when unset)."""
        if self.horizon_start is None:
            return self
        h = self.horizon_start
        return TimeSeriesSet(
            tuple(TimeSeries(s.id, s.values[:h], {k: v[:h] for k, v in s.covariates.items()})
                  for s in self.series),
            None, self.index[:h])

    def __eq__(self, other):
        if not isinstance(other, TimeSeriesSet):
            return NotImplemented
        return (self.series == other.series and self.horizon_start == other.horizon_start
                and np.array_equal(self.index, other.index))


@dataclass(frozen=True, eq=False)
class TruthScenario:
    demands: np.ndarray
    product_ids: tuple = ()

    def __post_init__(self):
        d = np.asarray(self.demands, dtype=float)
        if d.ndim != 2 or np.any(d < 0):
            raise ValueError("truth demands must be a nonnegative (T, J) matrix")
        object.__setattr__(self, "demands", d)

    @property
    def T(self) -> int:
        return self.demands.shape[0]


@dataclass
class DatasetFormat:
    """Column mapping of a demand CSV.  ``covariates=None`` takes every other column."""

    series_id: str = "series_id"
    t: str = "t"
    demand: str = "demand"
    covariates: list | None = None
    horizon_start: int | None = None

    @classmethod
    def from_dict(cls, d: dict | None) -> "DatasetFormat":
        return cls(**(d or {}))


def load_dataset(path, format_spec: DatasetFormat | dict | None = None) -> TimeSeriesSet:
    fmt = format_spec if isinstance(format_spec, DatasetFormat) else DatasetFormat.from_dict(format_spec)
    df = pd.read_csv(path, float_precision="round_trip")
    for col in (fmt.series_id, fmt.t, fmt.demand):
        if col not in df.columns:
            raise MissingColumn(f"column {col!r} not found in {path}")
    covs = fmt.covariates
    if covs is None:
        covs = [c for c in df.columns if c not in (fmt.series_id, fmt.t, fmt.demand)]
    for col in covs:
        if col not in df.columns:
            raise MissingColumn(f"covariate column {col!r} not found in {path}")
    df[fmt.series_id] = df[fmt.series_id].astype(str)
    demand = pd.to_numeric(df[fmt.demand], errors="coerce")
    bad = demand.isna() | (demand < 0)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise NegativeDemand(df[fmt.series_id].iloc[row], row, df[fmt.demand].iloc[row])
    df[fmt.demand] = demand.astype(float)
    if covs and df[covs].isna().any().any():
        row = int(np.flatnonzero(df[covs].isna().any(axis=1).to_numpy())[0])
        raise MissingValue(f"missing covariate value at row {row}")

    series, index = [], None
    for sid, grp in df.groupby(fmt.series_id, sort=False):
        grp = grp.sort_values(fmt.t, kind="stable")
        t = grp[fmt.t].to_numpy(dtype=int)
        if index is None:
            index = t
        elif len(t) != len(index) or not np.array_equal(t, index):
            raise RaggedSeries(f"series {sid!r} does not share the common time index")
        series.append(TimeSeries(sid, grp[fmt.demand].to_numpy(),
                                 {c: grp[c].to_numpy(dtype=float) for c in covs}))
    hs = fmt.horizon_start
    return TimeSeriesSet(tuple(series), hs, index)


def write_dataset(data: TimeSeriesSet, path) -> None:
    frames = []
    for s in data.series:
        cols = {"series_id": s.id, "t": data.index, "demand": s.values}
        cols.update({k: s.covariates[k] for k in data.covariate_names})
        frames.append(pd.DataFrame(cols))
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")


def split_train_truth(data: TimeSeriesSet, T: int) -> tuple[TimeSeriesSet, TruthScenario]:
    """Training data before ``horizon_start`` and the ``T`` following periods as truth."""
    if data.horizon_start is None:
        raise HorizonOverrun("dataset has no horizon_start")
    if T < 1:
        raise HorizonOverrun(f"planning horizon must be at least one period, got {T}")
    h = data.horizon_start
    if h + T > data.length:
        raise HorizonOverrun(f"need {h + T} periods, series have {data.length}")
    truth = data.values[h:h + T]
    return data.training(), TruthScenario(truth, data.ids)


@dataclass
class GeneratorConfig:
    """Ratios driving :func:`generate_instance_params`.

    Costs: holding ``holding_cost`` per unit-period, backlog
    ``backlog_ratio * holding``, setup ``setup_ratio * holding * mean demand``,
    overtime ``overtime_cost_ratio * holding / mean unit time`` per time unit.
    """

    periods: int = 8
    capacity_ratio: float = 1.5
    inventory_ratio: float = 3.0
    overtime_ratio: float = 0.5
    holding_cost: float = 1.0
    backlog_ratio: float = 5.0
    setup_ratio: float = 50.0
    overtime_cost_ratio: float = 2.0
    unit_time_range: tuple = (1.0, 2.0)
    setup_time_range: tuple = (5.0, 10.0)
    cost_multipliers: list | None = None

    def __post_init__(self):
        if int(self.periods) < 1:
            raise ValueError("periods must be positive")
        for name in ("capacity_ratio", "overtime_ratio", "holding_cost", "backlog_ratio",
                     "setup_ratio", "overtime_cost_ratio"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.inventory_ratio < 0:
            raise ValueError("inventory_ratio must be nonnegative")
        self.unit_time_range = tuple(self.unit_time_range)
        self.setup_time_range = tuple(self.setup_time_range)
        if self.cost_multipliers is not None and len(self.cost_multipliers) != self.periods:
            raise ValueError("cost_multipliers needs one entry per period")

    @classmethod
    def from_dict(cls, d: dict | None) -> "GeneratorConfig":
        return cls(**(d or {}))

    @classmethod
    def from_file(cls, path) -> "GeneratorConfig":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["unit_time_range"] = list(self.unit_time_range)
        d["setup_time_range"] = list(self.setup_time_range)
        return d


def generate_instance_params(data: TimeSeriesSet, gen_config: GeneratorConfig | dict | None,
                             seed: int) -> MSlagInstance:
    """Draw a seeded lot-sizing instance scaled to the training demand of ``data``."""
    cfg = gen_config if isinstance(gen_config, GeneratorConfig) else GeneratorConfig.from_dict(gen_config)
    train = data.training().values
    mean = train.mean(axis=0)
    J, T = train.shape[1], int(cfg.periods)
    rng = np.random.default_rng(seed)
    unit_time = rng.uniform(*cfg.unit_time_range, size=J)
    setup_time = rng.uniform(*cfg.setup_time_range, size=J)
    load = float(np.mean(train @ unit_time))
    capacity = np.full(T, cfg.capacity_ratio * load)
    h = cfg.holding_cost
    mult = np.ones(T) if cfg.cost_multipliers is None else np.asarray(cfg.cost_multipliers, float)
    per_tj = mult[:, None] * np.ones((T, J))
    return MSlagInstance(
        setup_time=setup_time,
        unit_time=unit_time,
        capacity=capacity,
        inventory_cap=np.tile(cfg.inventory_ratio * mean, (T, 1)),
        overtime_cap=cfg.overtime_ratio * capacity,
        setup_cost=per_tj * cfg.setup_ratio * h * mean,
        backlog_cost=per_tj * cfg.backlog_ratio * h,
        holding_cost=per_tj * h,
        overtime_cost=mult * cfg.overtime_cost_ratio * h / unit_time.mean(),
        product_ids=data.ids,
    )


def simulate_ar1(n_series: int, length: int, phi: float, gamma: float, sigma: float, seed: int,
                 horizon_start: int | None = None, clip: bool = True) -> TimeSeriesSet:
    """Seeded AR(1) demand ``y_t = gamma + phi (y_{t-1} - gamma) + sigma e_t``.

    The first value is drawn from the stationary law when ``|phi| < 1``.
    Demand is clipped at zero unless ``clip`` is off, in which case negative
    values raise in :class:`TimeSeries`.
    """
    rng = np.random.default_rng(seed)
    y = np.empty((length, n_series))
    sd0 = sigma / np.sqrt(1 - phi ** 2) if abs(phi) < 1 else sigma
    y[0] = gamma + sd0 * rng.standard_normal(n_series)
    for t in range(1, length):
        y[t] = gamma + phi * (y[t - 1] - gamma) + sigma * rng.standard_normal(n_series)
    if clip:
        y = np.maximum(y, 0.0)
    return TimeSeriesSet(tuple(TimeSeries(f"s{j}", y[:, j]) for j in range(n_series)), horizon_start)
