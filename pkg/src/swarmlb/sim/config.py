"""Simulation and strategy configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..global_index import InvalidConfiguration

US = 1_000_000

STRATEGIES = ("swarm", "static_uniform", "static_history", "replicated")


def seconds_to_us(s: float) -> int:
    return int(round(s * US))


@dataclass
class SimConfig:
    seed: int = 7
    executors: int = 8
    routers: int = 2
    grid: tuple[int, int] = (64, 64)
    round_period: float = 15.0
    merge_period: float = 5 * 3600.0
    window: float = 600.0  # math.inf keeps everything
    latency: tuple[float, float] = (0.0002, 0.001)  # per hop, seconds
    service_cost: float = 200e-6  # seconds per point-query check
    beta: int = 20
    fade: bool = True
    interval: float = 60.0
    queue_threshold: int = 50
    control_period: float = 1.0
    min_rate_frac: float = 0.02
    rate_step_frac: float = 0.05
    update_chunk: int = 256  # cells swapped per index-update event
    update_chunk_delay: float = 20e-6
    reduce_delay: float = 0.002
    activation_delay: float | None = None  # default: 10 hops of maximum latency
    snapshot_times: tuple[float, ...] = ()
    drain_limit: float = 3600.0

    def validate(self) -> None:
        if self.executors < 1:
            raise InvalidConfiguration("need at least one executor")
        if self.routers < 1:
            raise InvalidConfiguration("need at least one router (the Coordinator)")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise InvalidConfiguration(f"grid must be at least 1x1, got {self.grid}")
        for name in ("round_period", "merge_period", "interval", "control_period", "window"):
            if not getattr(self, name) > 0:
                raise InvalidConfiguration(f"{name} must be positive")
        lo, hi = self.latency
        if lo < 0 or hi < lo:
            raise InvalidConfiguration(f"bad latency range {self.latency}")
        if self.service_cost < 0 or self.reduce_delay < 0 or self.update_chunk_delay < 0:
            raise InvalidConfiguration("costs and delays must be non-negative")
        if self.beta < 1:
            raise InvalidConfiguration("beta must be at least 1")
        if self.queue_threshold < 1 or self.update_chunk < 1:
            raise InvalidConfiguration("queue_threshold and update_chunk must be at least 1")
        if not 0 < self.min_rate_frac <= 1 or not 0 < self.rate_step_frac <= 1:
            raise InvalidConfiguration("rate fractions must lie in (0, 1]")
        if self.activation_delay is not None and self.activation_delay < 0:
            raise InvalidConfiguration("activation_delay must be non-negative")

    @property
    def window_us(self) -> int | None:
        return None if math.isinf(self.window) else seconds_to_us(self.window)

    @property
    def latency_us(self) -> tuple[int, int]:
        return seconds_to_us(self.latency[0]), seconds_to_us(self.latency[1])

    @property
    def activation_delay_us(self) -> int:
        if self.activation_delay is not None:
            return seconds_to_us(self.activation_delay)
        return 10 * max(1, self.latency_us[1])


@dataclass
class StrategyConfig:
    kind: str = "swarm"
    history_points: int = 4000
    history_queries: int = 2000
    history_duration: float | None = None  # seconds of pre-hotspot workload sampled
    balance_tolerance: float = 0.10
    max_history_iterations: int = 200
    merges: bool = True

    def validate(self) -> None:
        if self.kind not in STRATEGIES:
            raise InvalidConfiguration(f"unknown strategy {self.kind!r}; choose from {', '.join(STRATEGIES)}")
        if self.kind == "static_history" and (self.history_points <= 0 or self.history_queries <= 0):
            raise InvalidConfiguration("static_history needs positive history sample sizes")

    @property
    def rebalancing(self) -> bool:
        return self.kind == "swarm"


@dataclass
class ManualMove:
    """Test hook: at ``time`` move the partition owning ``cell`` to ``target``."""

    time: float
    cell: tuple[int, int]
    target: int
    split: bool = False


@dataclass
class RunOptions:
    manual_moves: list[ManualMove] = field(default_factory=list)
    check_tiling: bool = False  # verify every router grid after each update chunk
    scripted_queries: list = field(default_factory=list)  # extra QueryEvents; ids must not clash
