"""2D finite-difference solver for ferrofluid flow with spin and magnetization relaxation."""

from .config import RunConfig, parse_config, serialize_config
from .dynamics import StepperConfig, run, step_full, step_limit
from .model import AppliedField, Grid, LimitState, Params, State

__all__ = [
    "AppliedField", "Grid", "LimitState", "Params", "RunConfig", "State", "StepperConfig",
    "parse_config", "run", "serialize_config", "step_full", "step_limit",
]
__version__ = "0.1.0"
