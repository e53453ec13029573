"""FDR-controlled variable selection with nearest-neighbour penalized occurrences, and sparse index tracking."""
from .calibration import CalibrationOutcome, EstimatorState, SelectionResult, calibrate, fdp_hat, pick_v, v_hat
from .dataset import DataError, Dataset, TruthReport, truth_report, validate_and_standardize
from .forward import DummyConfig, ExperimentEnsemble, ForwardPath, generate_dummies, run_experiments, terminated_forward_path
from .occurrence import GroupMap, OccurrenceProfile, nn_groups, nn_occurrences, nn_penalties, relative_occurrences
from .synthetic import BenchReport, SynthConfig, TRexSelector, empirical_fdr_tpr, generate
from .tracking import PortfolioSchedule, PricePanel, ReturnsWindow, rolling_backtest, solve_tracking_qp, to_returns, wealth_and_mste

__version__ = "0.1.0"

__all__ = [
    "BenchReport", "CalibrationOutcome", "DataError", "Dataset", "DummyConfig", "EstimatorState",
    "ExperimentEnsemble", "ForwardPath", "GroupMap", "OccurrenceProfile", "PortfolioSchedule",
    "PricePanel", "ReturnsWindow", "SelectionResult", "SynthConfig", "TRexSelector", "TruthReport",
    "calibrate", "empirical_fdr_tpr", "fdp_hat", "generate", "generate_dummies", "nn_groups",
    "nn_occurrences", "nn_penalties", "pick_v", "relative_occurrences", "rolling_backtest",
    "run_experiments", "solve_tracking_qp", "terminated_forward_path", "to_returns", "truth_report",
    "v_hat", "validate_and_standardize", "wealth_and_mste",
]
