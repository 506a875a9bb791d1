"""High-dimensional covariance estimation, portfolio allocation, and
simulation/backtesting harnesses."""

from . import allocation, backtest, estimators, linalg, metrics, models, simulation
from .allocation import STRATEGIES, allocate, hrp_weights, mvp_long_only, mvp_weights, uniform_weights
from .estimators import ESTIMATOR_KINDS, EstimatorConfig, estimate
from .models import ModelConfig
from .simulation import SweepConfig, run_sweep, run_table

__version__ = "0.1.0"

__all__ = [
    "allocation",
    "backtest",
    "estimators",
    "linalg",
    "metrics",
    "models",
    "simulation",
    "STRATEGIES",
    "ESTIMATOR_KINDS",
    "EstimatorConfig",
    "ModelConfig",
    "SweepConfig",
    "allocate",
    "estimate",
    "hrp_weights",
    "mvp_long_only",
    "mvp_weights",
    "uniform_weights",
    "run_sweep",
    "run_table",
    "__version__",
]
