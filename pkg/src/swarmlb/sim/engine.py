"""Wires routers, executors, sources and timers into one deterministic run."""

from __future__ import annotations

import random

from ..global_index import CellGrid, init_partitioning
from ..stats import StatsMatrix
from ..workload import QueryEvent, Workload, WorkloadSpec
from .config import US, RunOptions, SimConfig, StrategyConfig, seconds_to_us
from .core import DataPoint, EventLoop, Network, QueryInfo, QueryMsg
from .executor import Executor
from .metrics import IntegrityLedger, MetricsCollector
from .router import Coordinator, Router


def stats_bytes(kind: str, executors: int, live_cells: int) -> int:
    """Bytes of statistics shipped to the Coordinator per round (8-byte numbers)."""
    if executors < 0 or live_cells < 0:
        raise ValueError("counts must be non-negative")
    if kind == "decentralized":
        return executors * 2 * 8
    if kind == "centralized":
        return live_cells * 5 * 8
    raise ValueError(f"unknown statistics layout {kind!r}")


class Simulation:
    def __init__(
        self,
        config: SimConfig,
        workload: WorkloadSpec,
        strategy: StrategyConfig | None = None,
        options: RunOptions | None = None,
        initial_grid: CellGrid | None = None,
    ):
        config.validate()
        strategy = strategy or StrategyConfig()
        strategy.validate()
        if tuple(workload.grid) != tuple(config.grid):
            raise ValueError(f"workload grid {workload.grid} differs from simulator grid {config.grid}")
        self.config = config
        self.spec = workload
        self.strategy = strategy
        self.options = options or RunOptions()
        self.loop = EventLoop()
        self.metrics = MetricsCollector(seconds_to_us(config.interval), config.executors)
        self.ledger = IntegrityLedger()
        self.net = Network(self.loop, random.Random(f"{config.seed}:latency"), config.latency_us, self._on_send)
        self.window_us = config.window_us
        self.service_cost_us = max(0, int(round(config.service_cost * US)))
        self.reduce_delay_us = seconds_to_us(config.reduce_delay)
        self.update_chunk_delay_us = seconds_to_us(config.update_chunk_delay)
        self.duration_us = seconds_to_us(workload.duration)
        self.workload = Workload(workload, config.seed)
        self._route_rng = random.Random(f"{config.seed}:sources")
        self._point_rng = random.Random(f"{config.seed}:points")
        self._arrival_rng = random.Random(f"{config.seed}:arrivals")
        self.queries: list[QueryInfo] = []
        self.snapshots: dict[float, str] = {}
        self.rate = workload.base_rate
        self._ran = False

        W, H = config.grid
        if strategy.kind == "replicated":
            grid = None
        elif initial_grid is not None:
            grid = initial_grid.copy()
        elif strategy.kind == "static_history":
            from ..baselines import static_history_plan

            grid = static_history_plan(workload, config, strategy).grid
        else:
            grid = init_partitioning(config.executors, (W, H))
        self.executors = {m: Executor(self, m) for m in range(1, config.executors + 1)}
        if grid is None:
            whole = CellGrid(W, H).bounds
            from ..global_index import PartitionRef

            for m, ex in self.executors.items():
                ex.install(PartitionRef(m, whole, m), StatsMatrix(whole))
        else:
            for ref in grid.partitions():
                if ref.machine_id not in self.executors:
                    raise ValueError(f"plan assigns partition {ref.partition_id} to unknown machine {ref.machine_id}")
                self.executors[ref.machine_id].install(ref, StatsMatrix(ref.bounds))
        self.coordinator = Coordinator(self, grid.copy() if grid else None, strategy.rebalancing, strategy.merges)
        self.routers: list[Router] = [self.coordinator] + [
            Router(self, i, grid.copy() if grid else None) for i in range(1, config.routers)
        ]
        for r in self.routers:
            self.net.register(r.addr, r.handle)
        for m, ex in self.executors.items():
            self.net.register(ex.addr, ex.handle)
        self.net.register(("source", 0), lambda src, msg: None)

    # -- helpers -----------------------------------------------------------

    def stats_bytes(self, kind: str) -> int:
        W, H = self.config.grid
        return stats_bytes(kind, self.config.executors, W * H)

    def _on_send(self, src, dst, msg) -> None:
        self.metrics.on_message(self.loop.now, type(msg).__name__, msg.size())

    def max_queue(self) -> int:
        return max(ex.queue_length() for ex in self.executors.values())

    # -- sources -------------------------------------------------------------

    def _schedule_point(self) -> None:
        gap = self._arrival_rng.expovariate(self.rate) * US if self.rate > 0 else None
        if gap is None:
            return
        t = self.loop.now + max(1, int(gap))
        if t < self.duration_us:
            self.loop.at(t, self._inject_point)

    def _inject_point(self) -> None:
        now = self.loop.now
        x, y = self.workload.sample_point(now, self._point_rng)
        self._emit_point(now, x, y)
        self._schedule_point()

    def _emit_point(self, now: int, x: int, y: int) -> None:
        tid = self.ledger.inject(now, x, y)
        self.metrics.bin(now).injected += 1
        r = self._route_rng.randrange(self.config.routers)
        self.net.send(("source", 0), ("router", r), DataPoint(tid, x, y, now))

    def _control(self) -> None:
        cfg = self.config
        base = self.spec.base_rate
        if self.max_queue() > cfg.queue_threshold:
            self.rate = max(self.rate / 2, base * cfg.min_rate_frac)
        else:
            self.rate = min(self.rate + base * cfg.rate_step_frac, base)
        self.metrics.inject_rate[self.loop.now // self.metrics.interval_us] = self.rate
        nxt = self.loop.now + seconds_to_us(cfg.control_period)
        if nxt < self.duration_us:
            self.loop.at(nxt, self._control)

    def _inject_query(self, ev: QueryEvent) -> None:
        now = self.loop.now
        active = now + self.config.activation_delay_us if ev.kind == "continuous" else now
        q = QueryInfo(ev.query_id, ev.rect, ev.kind, now, active)
        self.queries.append(q)
        if ev.kind == "continuous":
            self.metrics.query_times.append(now)
        r = self._route_rng.randrange(self.config.routers)
        self.net.send(("source", 0), ("router", r), QueryMsg(q))

    # -- timers ------------------------------------------------------------------

    def _round(self, k: int) -> None:
        for m in sorted(self.executors):
            self.executors[m].on_round(k)
        nxt = (k + 1) * seconds_to_us(self.config.round_period)
        if nxt <= self.duration_us:
            self.loop.at(nxt, self._round, k + 1)

    def _merge_sweep(self) -> None:
        self.coordinator.start_merge_sweep()
        nxt = self.loop.now + seconds_to_us(self.config.merge_period)
        if nxt <= self.duration_us:
            self.loop.at(nxt, self._merge_sweep)

    def _snapshot(self, t: float) -> None:
        if self.coordinator.grid is not None:
            self.snapshots[t] = self.coordinator.grid.to_snapshot()

    # -- run ---------------------------------------------------------------------

    def run(self):
        from ..report import build_report

        if self._ran:
            raise RuntimeError("a Simulation runs once; build a new one")
        self._ran = True
        cfg = self.config
        loop = self.loop
        if self.spec.base_distribution == "trace":
            for p in self.workload.point_stream():
                if p.time < self.duration_us:
                    loop.at(p.time, self._emit_point, p.time, p.x, p.y)
        else:
            self._schedule_point()
            loop.at(0, self._control)
        schedule = self.workload.query_schedule()
        ids = {ev.query_id for ev in schedule}
        for ev in self.options.scripted_queries:
            if ev.query_id in ids:
                raise ValueError(f"scripted query id {ev.query_id} is already used")
            ids.add(ev.query_id)
        for ev in sorted(schedule + list(self.options.scripted_queries), key=lambda e: (e.time, e.query_id)):
            if ev.time < self.duration_us:
                loop.at(ev.time, self._inject_query, ev)
        period = seconds_to_us(cfg.round_period)
        if period <= self.duration_us:
            loop.at(period, self._round, 1)
        merge = seconds_to_us(cfg.merge_period)
        if merge <= self.duration_us:
            loop.at(merge, self._merge_sweep)
        for mv in self.options.manual_moves:
            loop.at(seconds_to_us(mv.time), self.coordinator.schedule_manual, mv)
        for t in cfg.snapshot_times:
            loop.at(seconds_to_us(t), self._snapshot, t)
        loop.run(until=self.duration_us + seconds_to_us(cfg.drain_limit))
        self._snapshot(self.duration_us / US)
        return build_report(self)
