"""Deterministic discrete-event simulation of the routing and execution layers."""

from .config import ManualMove, RunOptions, SimConfig, StrategyConfig
from .engine import Simulation, stats_bytes

__all__ = ["ManualMove", "RunOptions", "SimConfig", "Simulation", "StrategyConfig", "stats_bytes"]
