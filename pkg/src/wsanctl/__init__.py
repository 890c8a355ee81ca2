"""Co-simulator for MPC control loops closed over a TDMA wireless mesh."""

from .actuation import ActuationBuffer
from .adaptation import AdaptConfig, AdaptState, hc_step, pn_step
from .config import ScenarioConfig, load_config, preset_path
from .errors import ConfigurationError, NumericalError, SchedulingError, WsanctlError
from .estimator import EstimatorState, advance
from .harness import run_batch, run_period_pipeline, run_scenario
from .metrics import EnergyModel, MetricsLog, actual_tx_stats, battery_life, mae
from .mpc import (
    LyapunovConstants,
    MpcConfig,
    MpcSolution,
    Polytope,
    decay_envelope,
    lqr_gain,
    lyapunov_constants,
    safety_ok,
    solve_dare,
    solve_mpc,
    terminal_set,
)
from .plant import DisturbanceProfile, PlantModel, PlantState, Setpoint, measure, setpoint_residual, step
from .qp import DEFAULT_BACKEND, HAVE_EXTENSION, solve_qp

__version__ = "0.1.0"

__all__ = [
    "ActuationBuffer",
    "AdaptConfig",
    "AdaptState",
    "ConfigurationError",
    "DEFAULT_BACKEND",
    "DisturbanceProfile",
    "EnergyModel",
    "EstimatorState",
    "HAVE_EXTENSION",
    "LyapunovConstants",
    "MetricsLog",
    "MpcConfig",
    "MpcSolution",
    "NumericalError",
    "PlantModel",
    "PlantState",
    "Polytope",
    "ScenarioConfig",
    "SchedulingError",
    "Setpoint",
    "WsanctlError",
    "actual_tx_stats",
    "advance",
    "battery_life",
    "decay_envelope",
    "hc_step",
    "load_config",
    "lqr_gain",
    "lyapunov_constants",
    "mae",
    "measure",
    "pn_step",
    "preset_path",
    "run_batch",
    "run_period_pipeline",
    "run_scenario",
    "safety_ok",
    "setpoint_residual",
    "solve_dare",
    "solve_mpc",
    "solve_qp",
    "step",
    "terminal_set",
]
