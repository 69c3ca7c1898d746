"""Adaptive load balancing for distributed spatial stream processing."""

from .geometry import CellCoord, CellRect
from .global_index import CellGrid, PartitionRef, PlanUpdate, init_partitioning
from .stats import Axis, StatsMatrix

__all__ = [
    "Axis",
    "CellCoord",
    "CellGrid",
    "CellRect",
    "PartitionRef",
    "PlanUpdate",
    "StatsMatrix",
    "init_partitioning",
]

__version__ = "0.1.0"
