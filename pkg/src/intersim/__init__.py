"""Data-driven traffic intersection simulation.

Mixture priors over whole-trajectory features, time-of-day arrival
profiles, spline trajectory priors, a recurrent refinement model, a tick
engine with live commands, and a WebSocket control server.
"""

from . import core, density, engine, errors, forecaster, gmm, ingest, metrics, spline
from .core import (
    AgentKind,
    Scene,
    Trajectory,
    TrajectoryFeature,
    resample_uniform,
    slice_scene,
    vectorize_trajectory,
)
from .density import TodDensityModel, fit_tod
from .engine import SimConfig, SimEngine
from .forecaster import ForecastModel, init_model, rollout
from .gmm import GmmModel, fit_em
from .spline import PriorTrajectory, fit_clamped, prior_from_feature

__version__ = "0.1.0"

__all__ = [
    "AgentKind",
    "ForecastModel",
    "GmmModel",
    "PriorTrajectory",
    "Scene",
    "SimConfig",
    "SimEngine",
    "TodDensityModel",
    "Trajectory",
    "TrajectoryFeature",
    "core",
    "density",
    "engine",
    "errors",
    "fit_clamped",
    "fit_em",
    "fit_tod",
    "forecaster",
    "gmm",
    "ingest",
    "init_model",
    "metrics",
    "prior_from_feature",
    "resample_uniform",
    "rollout",
    "slice_scene",
    "spline",
    "vectorize_trajectory",
]
