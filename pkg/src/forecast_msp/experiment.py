"""Benchmark sweeps: forecasters x policies x horizons x seeds over product groups.

A sweep is defined by a YAML file::

    dataset:
      synthetic: {n_series: 2, length: 65, phi: 0.8, gamma: 10, sigma: 3}
      # or  path: demand.csv
      #     format: {series_id: item, t: week, demand: sales}
    groups: [[s0, s1]]          # optional, default one group of all series
    T: [5]
    generator: {setup_ratio: 1.0, capacity_ratio: 2.5}
    forecasters:
      - {name: ar1}
      - {name: ar1, label: ar1_half, std_factor: 0.5}
      - {name: rnn, epochs: 50, hidden_size: 16}
    policies:
      - {policy: deterministic}
      - {policy: two_stage, n_scenarios: 9}
    seeds: [0, 1]
    out: report

A synthetic dataset is redrawn for every seed; a file dataset is shared and
the seed only drives the instance, the scenario sampling and RNN training.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .dataset import (DatasetFormat, GeneratorConfig, TimeSeriesSet, generate_instance_params,
                      load_dataset, simulate_ar1, split_train_truth)
from .exceptions import InvalidConfig, ZeroPIBound
from .forecast import FORECASTERS, OracleForecaster, ScaledForecaster, make_forecaster
from .forecast.base import derive_seed
from .metrics import DEFAULT_RHOS, MetricReport, gap_percent, nd_row, rho_risks
from .rolling import PolicyConfig, perfect_information_cost, run_rolling_horizon

ORACLE = "oracle"
SEEDED = ("rnn",)


@dataclass
class ForecasterSpec:
    name: str
    label: str
    params: dict = field(default_factory=dict)
    std_factor: float | None = None

    @classmethod
    def from_dict(cls, d) -> "ForecasterSpec":
        d = {"name": d} if isinstance(d, str) else dict(d)
        name = d.pop("name", None)
        if name != ORACLE and name not in FORECASTERS:
            raise InvalidConfig(f"unknown forecaster {name!r}; choose from "
                                f"{sorted([*FORECASTERS, ORACLE])}")
        label = str(d.pop("label", name))
        std = d.pop("std_factor", None)
        spec = cls(name, label, d, None if std is None else float(std))
        spec.build(0)  # surfaces bad hyperparameters at load time
        return spec

    def build(self, seed: int):
        if self.name == ORACLE:
            return OracleForecaster()
        params = dict(self.params)
        if self.name in SEEDED:
            params.setdefault("seed", seed)
        try:
            est = make_forecaster(self.name, **params)
        except TypeError as exc:
            raise InvalidConfig(f"forecaster {self.label!r}: {exc}") from None
        if hasattr(est, "_check_config"):
            est._check_config()
        return est if self.std_factor is None else ScaledForecaster(est, self.std_factor)

    def fit(self, train: np.ndarray, full: np.ndarray, seed: int, covariates=None):
        """Fit on ``train``; the oracle additionally sees ``full``."""
        est = self.build(seed)
        if self.name == ORACLE:
            est.set_params(series=full)
            return est.fit(train)
        if covariates is not None and self.name in SEEDED:
            return est.fit(train, covariates=covariates[:len(train)])
        return est.fit(train)

    def uses_covariates(self) -> bool:
        return self.name in SEEDED


@dataclass
class ExperimentConfig:
    dataset: dict
    T: list
    forecasters: list
    policies: list
    seeds: list = field(default_factory=lambda: [0])
    groups: list | None = None
    generator: dict = field(default_factory=dict)
    rhos: list = field(default_factory=lambda: list(DEFAULT_RHOS))
    n_paths: int = 1000
    out: str = "report"

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise InvalidConfig("config must be a mapping")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        for key in ("dataset", "T", "forecasters", "policies"):
            if key not in d:
                raise InvalidConfig(f"config lacks {key!r}")
        cfg = cls(**d)
        if base_dir is not None and "path" in cfg.dataset:
            cfg.dataset = dict(cfg.dataset, path=str(Path(base_dir) / cfg.dataset["path"]))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise InvalidConfig(f"cannot parse {path}: {exc}") from None
        return cls.from_dict(raw, base_dir=path.parent)

    def validate(self) -> None:
        self.T = [int(t) for t in np.atleast_1d(self.T)]
        if not self.T or min(self.T) < 1:
            raise InvalidConfig("every T must be a positive integer")
        self.seeds = [int(s) for s in np.atleast_1d(self.seeds)]
        if not self.seeds:
            raise InvalidConfig("no seeds given")
        self.forecaster_specs = [ForecasterSpec.from_dict(f) for f in self.forecasters]
        labels = [f.label for f in self.forecaster_specs]
        if len(set(labels)) != len(labels):
            raise InvalidConfig("forecaster labels must be unique")
        self.policy_specs = []
        for p in self.policies:
            p = {"policy": p} if isinstance(p, str) else dict(p)
            label = str(p.pop("label", p.get("policy")))
            self.policy_specs.append((label, PolicyConfig.from_dict(p)))
        if len({lbl for lbl, _ in self.policy_specs}) != len(self.policy_specs):
            raise InvalidConfig("policy labels must be unique")
        try:
            self.generator_config = GeneratorConfig.from_dict(self.generator)
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"generator: {exc}") from None
        for r in self.rhos:
            if not 0 < float(r) < 1:
                raise InvalidConfig("rho levels must lie in (0, 1)")
        if "synthetic" not in self.dataset and "path" not in self.dataset:
            raise InvalidConfig("dataset needs 'path' or 'synthetic'")
        data = self.load(self.seeds[0])
        ids = set(data.ids)
        for g in self.group_ids(data):
            missing = [i for i in g if i not in ids]
            if missing:
                raise InvalidConfig(f"unknown series ids {missing}")
        start = self.horizon_start(data)
        if start < 2 or start + max(self.T) > data.length:
            raise InvalidConfig(f"T={max(self.T)} exceeds the {data.length - start} truth periods")

    def load(self, seed: int) -> TimeSeriesSet:
        ds = self.dataset
        if "synthetic" in ds:
            syn = dict(ds["synthetic"])
            try:
                return simulate_ar1(int(syn.pop("n_series", 2)), int(syn.pop("length")),
                                    float(syn.pop("phi")), float(syn.pop("gamma")),
                                    float(syn.pop("sigma")), seed, syn.pop("horizon_start", None))
            except KeyError as exc:
                raise InvalidConfig(f"synthetic dataset lacks {exc}") from None
        return load_dataset(ds["path"], DatasetFormat.from_dict(ds.get("format")))

    def group_ids(self, data: TimeSeriesSet) -> list:
        return [list(map(str, g)) for g in self.groups] if self.groups else [list(data.ids)]

    def horizon_start(self, data: TimeSeriesSet) -> int:
        if data.horizon_start is not None:
            return data.horizon_start
        return data.length - max(self.T)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _run_id(group: int, T: int, policy: str, forecaster: str, seed: int) -> str:
    safe = lambda s: re.sub(r"[^A-Za-z0-9_.-]", "-", s)
    return f"g{group}_T{T}_{safe(policy)}_{safe(forecaster)}_s{seed}"


def _unit(cfg: ExperimentConfig, g: int, spec: ForecasterSpec, seed: int) -> dict:
    """Everything for one (group, forecaster, seed): fit once, sweep T x policy."""
    data = cfg.load(seed)
    ids = cfg.group_ids(data)[g]
    data = data.select(ids)
    start = cfg.horizon_start(data)
    data = TimeSeriesSet(data.series, start, data.index)
    covs = data.covariate_array() if spec.uses_covariates() else None
    train_v = data.training().values
    model = spec.fit(train_v, data.values, seed, covs)
    runs, nds, risks = [], {}, {}
    for T in cfg.T:
        train, truth = split_train_truth(data, T)
        gen = GeneratorConfig.from_dict({**cfg.generator_config.to_dict(), "periods": T})
        inst = generate_instance_params(data, gen, seed)
        nds[T] = nd_row(model, train, truth, covs)
        risks[T] = rho_risks(model, train, truth, cfg.rhos, cfg.n_paths,
                             derive_seed(seed, g, T), covs)
        pi = perfect_information_cost(inst, truth)
        for label, pcfg in cfg.policy_specs:
            pc = PolicyConfig(**{**pcfg.__dict__, "forecaster": spec.label, "seed": seed})
            run = {"id": _run_id(g, T, label, spec.label, seed), "group": g, "series": ids,
                   "T": T, "policy": label, "forecaster": spec.label, "seed": seed,
                   "pi_cost": pi, "policy_config": dict(pc.__dict__), "instance": inst.to_dict()}
            try:
                trace = run_rolling_horizon(inst, truth, model, pc, train.values, covariates=covs)
                run.update(total_cost=trace.total_cost, aborted=trace.aborted, error=trace.error,
                           trace=trace.to_dict())
                if not trace.aborted:
                    run["gap_percent"] = gap_percent(trace.total_cost, pi)
            except ZeroPIBound as exc:
                run.update(gap_percent=None, error=f"excluded: {exc}")
            except Exception as exc:  # recorded, the sweep goes on
                run.update(aborted=True, error=f"{type(exc).__name__}: {exc}")
            run.setdefault("gap_percent", None)
            run.setdefault("aborted", False)
            runs.append(run)
    return {"group": g, "forecaster": spec.label, "seed": seed, "runs": runs,
            "nd": nds, "rho_risk": risks}


def _unit_safe(args):
    cfg, g, spec, seed = args
    try:
        return _unit(cfg, g, spec, seed)
    except Exception as exc:
        return {"group": g, "forecaster": spec.label, "seed": seed, "runs": [], "nd": {},
                "rho_risk": {}, "error": f"{type(exc).__name__}: {exc}"}


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dumps(obj) -> str:
    from .metrics import _jsonable
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


@dataclass
class BenchResult:
    runs: list
    failures: list
    report: MetricReport
    out: Path

    @property
    def ok(self) -> bool:
        return not self.failures


def aggregate_runs(runs: list) -> pd.DataFrame:
    """Gap% statistics per (group, T, policy, forecaster); std is the population std."""
    rows = []
    keyed = {}
    for r in runs:
        keyed.setdefault((r["group"], r["T"], r["policy"], r["forecaster"]), []).append(r)
    for key in sorted(keyed):
        gaps = np.array([r["gap_percent"] for r in keyed[key] if r["gap_percent"] is not None])
        stats = ([gaps.mean(), gaps.min(), gaps.max(), gaps.std()] if len(gaps)
                 else [np.nan] * 4)
        rows.append([*key, len(keyed[key]), len(keyed[key]) - len(gaps), *stats])
    return pd.DataFrame(rows, columns=["group", "T", "policy", "forecaster", "n_runs", "n_failed",
                                       "mean", "min", "max", "std"])


def gap_by_T(runs: list) -> pd.DataFrame:
    """Mean Gap% per (policy, forecaster, T): per-group means averaged over groups."""
    agg = aggregate_runs(runs)
    out = (agg.groupby(["policy", "forecaster", "T"], sort=True)["mean"]
           .agg(["mean", "std", "count"]).reset_index())
    out.columns = ["policy", "forecaster", "T", "mean_gap_percent", "std_over_groups", "n_groups"]
    out["std_over_groups"] = out["std_over_groups"].fillna(0.0)
    return out


def run_bench(cfg: ExperimentConfig, workers: int = 1, out=None) -> BenchResult:
    out = Path(out or cfg.out)
    units = [(cfg, g, spec, seed) for g in range(len(cfg.group_ids(cfg.load(cfg.seeds[0]))))
             for spec in cfg.forecaster_specs for seed in cfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_unit_safe, units))
    else:
        results = [_unit_safe(u) for u in units]

    runs, failures = [], []
    nd_acc, risk_acc = {}, {}
    for res in results:
        if "error" in res:
            failures.append(f"group {res['group']} {res['forecaster']} seed {res['seed']}: "
                            f"{res['error']}")
        for run in res["runs"]:
            runs.append(run)
            _write_atomic(out / "runs" / f"{run['id']}.json", _dumps(run))
            if run["aborted"] or (run["gap_percent"] is None and not
                                  str(run.get("error", "")).startswith("excluded")):
                failures.append(f"{run['id']}: {run.get('error', '')}")
        for T, row in res["nd"].items():
            nd_acc.setdefault(f"{res['forecaster']}/T{T}", []).append(row)
        for T, r in res["rho_risk"].items():
            risk_acc.setdefault(f"{res['forecaster']}/T{T}", []).append(r)

    report = MetricReport(
        nd={k: np.nanmean(np.array(v, dtype=float), axis=0).tolist() for k, v in sorted(nd_acc.items())},
        rho_risk={k: {rho: float(np.mean([r[rho] for r in v])) for rho in v[0]}
                  for k, v in sorted(risk_acc.items())},
        gap_percent={r["id"]: r["gap_percent"] for r in sorted(runs, key=lambda r: r["id"])},
        metadata={"forecasters": [f.label for f in cfg.forecaster_specs],
                  "policies": [lbl for lbl, _ in cfg.policy_specs], "T": cfg.T,
                  "seeds": cfg.seeds, "groups": len(cfg.group_ids(cfg.load(cfg.seeds[0]))),
                  "failures": failures},
    )
    _write_atomic(out / "report.json", report.to_json())
    _write_atomic(out / "aggregate.csv", aggregate_runs(runs).to_csv(index=False))
    _write_atomic(out / "gap_by_T.csv", gap_by_T(runs).to_csv(index=False))
    for T in cfg.T:
        rows = {k.rsplit("/T", 1)[0]: v for k, v in report.nd.items() if k.endswith(f"/T{T}")}
        _write_atomic(out / f"nd_T{T}.csv", MetricReport(nd=rows).nd_frame().to_csv())
    _write_atomic(out / "config.json", _dumps(cfg.to_dict()))
    return BenchResult(runs, failures, report, out)


def run_metrics(cfg: ExperimentConfig, out=None) -> MetricReport:
    """Forecast-quality part of a sweep only: ND tables and rho-risk."""
    out = Path(out or cfg.out)
    nd_acc, risk_acc = {}, {}
    for seed in cfg.seeds:
        full = cfg.load(seed)
        for g, ids in enumerate(cfg.group_ids(full)):
            data = full.select(ids)
            data = TimeSeriesSet(data.series, cfg.horizon_start(data), data.index)
            train_v = data.training().values
            for spec in cfg.forecaster_specs:
                covs = data.covariate_array() if spec.uses_covariates() else None
                model = spec.fit(train_v, data.values, seed, covs)
                for T in cfg.T:
                    train, truth = split_train_truth(data, T)
                    key = f"{spec.label}/T{T}"
                    nd_acc.setdefault(key, []).append(nd_row(model, train, truth, covs))
                    risk_acc.setdefault(key, []).append(
                        rho_risks(model, train, truth, cfg.rhos, cfg.n_paths,
                                  derive_seed(seed, g, T), covs))
    report = MetricReport(
        nd={k: np.nanmean(np.array(v, dtype=float), axis=0).tolist() for k, v in sorted(nd_acc.items())},
        rho_risk={k: {rho: float(np.mean([r[rho] for r in v])) for rho in v[0]}
                  for k, v in sorted(risk_acc.items())},
        metadata={"forecasters": [f.label for f in cfg.forecaster_specs], "T": cfg.T,
                  "seeds": cfg.seeds},
    )
    _write_atomic(out / "metrics.json", report.to_json())
    for T in cfg.T:
        rows = {k.rsplit("/T", 1)[0]: v for k, v in report.nd.items() if k.endswith(f"/T{T}")}
        _write_atomic(out / f"nd_T{T}.csv", MetricReport(nd=rows).nd_frame().to_csv())
    return report
