"""Dynamic group crowd simulation with reciprocal collision avoidance."""

from .engine import Metrics, SimState, run, simulate, step
from .io import load_scenario, read_trajectory, save_scenario, write_trajectory
from .model import Agent, Group, Obstacle, Scenario, SimParams, validate_scenario

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "Group",
    "Metrics",
    "Obstacle",
    "Scenario",
    "SimParams",
    "SimState",
    "load_scenario",
    "read_trajectory",
    "run",
    "save_scenario",
    "simulate",
    "step",
    "validate_scenario",
    "write_trajectory",
]
