"""Danger-aware human-robot interaction planning.

Predicts a pedestrian's motion as a mixture of cost-driven (Boltzmann) and
random choice, learns online whether the pedestrian reacts to danger, and
plans robot motion under a per-step collision-probability constraint.
"""

from .belief import Belief, update_belief
from .config import ConfigError, ScenarioConfig, load_config
from .core import ActionSet, Grid, Integrator
from .planner import Planner, PlanResult, RobotObjectives
from .prediction import HumanPredictor, OccupancyForecast
from .sim import EpisodeResult, run_episode, run_sweep

__version__ = "0.1.0"

__all__ = [
    "ActionSet", "Belief", "ConfigError", "EpisodeResult", "Grid", "HumanPredictor",
    "Integrator", "OccupancyForecast", "PlanResult", "Planner", "RobotObjectives",
    "ScenarioConfig", "load_config", "run_episode", "run_sweep", "update_belief",
]
