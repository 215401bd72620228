"""Forecast-driven look-ahead policies for multi-item lot sizing with backlogging."""

from .dataset import (DatasetFormat, GeneratorConfig, TimeSeries, TimeSeriesSet, TruthScenario,
                      generate_instance_params, load_dataset, simulate_ar1, split_train_truth,
                      write_dataset)
from .forecast import (AR1Forecaster, MeanForecaster, MovingAverageForecaster, OracleForecaster,
                       RNNForecaster, ScaledForecaster, load_model, make_forecaster, save_model)
from .metrics import MetricReport, gap_percent, nd, rho_risk_aggregate, rho_risk_product
from .milp import MILPModel, MILPSolution, solve_lp, solve_milp
from .model import (Decision, MSlagInstance, SystemState, build_deterministic,
                    build_perfect_information, build_two_stage, extract_first_stage)
from .rolling import PolicyConfig, PolicyTrace, perfect_information_cost, run_rolling_horizon
from .scenario import (Scenario, ScenarioSet, expected_scenario, sample_scenario_set,
                       worst_case_scenario)

__version__ = "0.1.0"

__all__ = [
    "AR1Forecaster", "DatasetFormat", "Decision", "GeneratorConfig", "MILPModel", "MILPSolution",
    "MSlagInstance", "MeanForecaster", "MetricReport", "MovingAverageForecaster",
    "OracleForecaster", "PolicyConfig", "PolicyTrace", "RNNForecaster", "ScaledForecaster",
    "Scenario", "ScenarioSet", "SystemState", "TimeSeries", "TimeSeriesSet", "TruthScenario",
    "build_deterministic", "build_perfect_information", "build_two_stage", "expected_scenario",
    "extract_first_stage", "gap_percent", "generate_instance_params", "load_dataset", "load_model",
    "make_forecaster", "nd", "perfect_information_cost", "rho_risk_aggregate", "rho_risk_product",
    "run_rolling_horizon", "sample_scenario_set", "save_model", "simulate_ar1", "solve_lp",
    "solve_milp", "split_train_truth", "worst_case_scenario", "write_dataset",
]
