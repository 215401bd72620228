"""Command line entry point: ``forecast-msp {fit,forecast,solve,bench,metrics}``.

Exit codes: 0 success, 1 configuration or input error, 2 runtime failure
(partial results may have been written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DatasetError, InvalidConfig
from .experiment import ExperimentConfig, run_bench, run_metrics
from .forecast import load_model, save_model
from .forecast.base import quantile
from .milp import solve_milp
from .model import MSlagInstance, SystemState, build_deterministic, build_two_stage
from .rolling import DETERMINISTIC, POLICIES, ROBUST
from .scenario import read_scenarios, write_scenarios

log = logging.getLogger("forecast_msp")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise InvalidConfig("--config is required")
    cfg = ExperimentConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed]
    return cfg


def _group_data(cfg: ExperimentConfig, seed: int):
    from .dataset import TimeSeriesSet
    data = cfg.load(seed)
    return TimeSeriesSet(data.series, cfg.horizon_start(data), data.index)


def _spec(cfg: ExperimentConfig, label: str | None):
    specs = cfg.forecaster_specs
    if label is None:
        if len(specs) != 1:
            raise InvalidConfig("config lists several forecasters; pick one with --forecaster")
        return specs[0]
    for s in specs:
        if s.label == label:
            return s
    raise InvalidConfig(f"forecaster {label!r} is not in the config")


def cmd_fit(args) -> int:
    cfg = _config(args)
    spec = _spec(cfg, args.forecaster)
    seed = cfg.seeds[0]
    data = _group_data(cfg, seed)
    covs = data.covariate_array() if spec.uses_covariates() else None
    model = spec.fit(data.training().values, data.values, seed, covs)
    out = Path(args.out or "model.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_forecast(args) -> int:
    cfg = _config(args)
    seed = cfg.seeds[0]
    data = _group_data(cfg, seed)
    model = load_model(args.model)
    history = data.training().values
    covs = data.covariate_array() if args.covariates else None
    dist = model.predict_distribution(history, args.horizon, covs)
    rows = []
    lo, hi = quantile(dist, 0.05), quantile(dist, 0.95)
    mean, median = dist.mean(), dist.median()
    for k in range(args.horizon):
        for j, sid in enumerate(data.ids):
            rows.append((sid, k, mean[k, j], median[k, j], lo[k, j], hi[k, j]))
    out = Path(args.out or "forecast.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=["series_id", "step", "mean", "median", "q05", "q95"]).to_csv(
        out, index=False)
    print(f"wrote {out}")
    if args.scenarios:
        from .scenario import sample_scenario_set
        sc = sample_scenario_set(model, history, args.horizon, args.scenarios, seed, covs)
        path = out.with_name(out.stem + "_scenarios.csv")
        write_scenarios(sc, path, data.ids)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_solve(args) -> int:
    """Build and solve the period-0 model of ``--instance`` against ``--scenarios``.

    Every scenario covers all periods of the instance; row 0 is the observed
    demand and must agree across scenarios.  Deterministic and robust models
    use the scenario mean, the two-stage model uses all scenarios.
    """
    if not args.instance or not args.scenarios:
        raise InvalidConfig("solve needs --instance and --scenarios")
    inst = MSlagInstance.from_dict(json.loads(Path(args.instance).read_text()))
    sset = read_scenarios(args.scenarios)
    D = sset.as_array()
    if D.shape[1:] != (inst.T, inst.J):
        raise InvalidConfig(f"scenarios have shape {D.shape[1:]}, instance needs {(inst.T, inst.J)}")
    if not np.allclose(D[:, 0], D[0, 0]):
        raise InvalidConfig("scenarios disagree on the observed first period")
    state = SystemState.zeros(inst.J)
    if args.policy in (DETERMINISTIC, ROBUST):
        mip = build_deterministic(inst, state, D[0, 0], D[:, 1:].mean(axis=0))
    else:
        mip = build_two_stage(inst, state, D[0, 0], [d[1:] for d in D])
    sol = solve_milp(mip, node_limit=args.node_limit)
    result = {"status": sol.status, "objective": sol.objective, "nodes": sol.nodes,
              "policy": args.policy}
    if sol.x is not None:
        result["solution"] = {mip.names[k]: float(v) for k, v in enumerate(sol.x) if v != 0}
    print(f"status {sol.status} objective {sol.objective} nodes {sol.nodes}")
    if args.out:
        Path(args.out).write_text(json.dumps(result, sort_keys=True, indent=1) + "\n")
    return EXIT_OK if sol.status == "optimal" else EXIT_RUNTIME


def cmd_bench(args) -> int:
    cfg = _config(args)
    res = run_bench(cfg, workers=args.workers, out=args.out)
    print(f"{len(res.runs)} runs written to {res.out}")
    for f in res.failures:
        print(f"failed: {f}", file=sys.stderr)
    return EXIT_OK if res.ok else EXIT_RUNTIME


def cmd_metrics(args) -> int:
    cfg = _config(args)
    report = run_metrics(cfg, out=args.out)
    print(json.dumps(report.rho_risk, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forecast-msp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workers=False):
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--seed", type=int, help="override the config's seed list")
        p.add_argument("--out", help="output file or directory")
        if workers:
            p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("fit", help="fit a forecaster on the pre-horizon data and save it")
    common(p)
    p.add_argument("--forecaster", help="forecaster label from the config")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="forecast summary and optional scenario file")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--scenarios", type=int, default=0, help="also sample this many scenarios")
    p.add_argument("--covariates", action="store_true", help="pass dataset covariates")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("solve", help="solve one look-ahead model")
    common(p)
    p.add_argument("--instance")
    p.add_argument("--scenarios")
    p.add_argument("--policy", choices=POLICIES, default=DETERMINISTIC)
    p.add_argument("--node-limit", type=int, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run a benchmark sweep")
    common(p, workers=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("metrics", help="ND tables and rho-risk only")
    common(p, workers=True)
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidConfig, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
