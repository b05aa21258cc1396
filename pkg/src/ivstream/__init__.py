"""Streaming instrumental-variable regression and endogenous linear bandits."""
from .bandit import make_oful, make_oful_iv, oful_iv_select, oful_select
from .confidence import ConfidenceParams, ellipsoid_contains, radius_b, radius_b_prime
from .dgp import GaussianIvConfig, PriceSalesConfig, draw_model
from .errors import (ConfigError, DegenerateVarianceError, InsufficientDataError,
                     InvalidArgumentError, IvStreamError, NumericalError, ParseError)
from .estimators import O2SLS, VAWR, OnlineRidge, batch_2sls
from .harness import ExperimentConfig, run_experiment, run_single
from .linalg import PosDefState

__all__ = [
    "make_oful", "make_oful_iv", "oful_iv_select", "oful_select",
    "ConfidenceParams", "ellipsoid_contains", "radius_b", "radius_b_prime",
    "GaussianIvConfig", "PriceSalesConfig", "draw_model",
    "ConfigError", "DegenerateVarianceError", "InsufficientDataError",
    "InvalidArgumentError", "IvStreamError", "NumericalError", "ParseError",
    "O2SLS", "VAWR", "OnlineRidge", "batch_2sls",
    "ExperimentConfig", "run_experiment", "run_single", "PosDefState",
]

__version__ = "0.1.0"
