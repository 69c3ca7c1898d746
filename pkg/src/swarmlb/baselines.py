"""Comparison strategies: replicated queries and the two static grids."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .cost import partition_cost_num
from .geometry import CellRect
from .global_index import CellGrid, IdAllocator, PartitionRef, PlanUpdate, init_partitioning
from .rebalancer import Infeasible, OwnedPartition, ReduceRequest, SplitMove, SubsetMove, reduce_workload
from .stats import StatsMatrix, stats_from_arrivals, totals
from .workload import Workload, WorkloadSpec, query_rect


class RoundRobin:
    """Point assignment of the replicated strategy: machines 1..n in turn."""

    def __init__(self, executors: int):
        if executors < 1:
            raise ValueError("need at least one executor")
        self.executors = executors
        self._last = 0

    def next(self) -> int:
        self._last = self._last % self.executors + 1
        return self._last


def replicated_route(kind: str, executors: int, rr: RoundRobin) -> list[int]:
    """Machines receiving one arrival: every executor for a query, the next one for a point."""
    if kind == "query":
        return list(range(1, executors + 1))
    if kind == "point":
        return [rr.next()]
    raise ValueError(f"unknown arrival kind {kind!r}")


@dataclass
class HistorySample:
    points: list[tuple[int, int]]
    queries: list[CellRect]


def history_sample(spec: WorkloadSpec, seed: int, n_points: int, n_queries: int, before: float | None = None) -> HistorySample:
    """Points and queries drawn from the workload as it looks before any hotspot."""
    if before is None:
        starts = [h.start for h in spec.hotspots]
        before = min(starts) if starts else spec.duration
    w = Workload(spec, seed)
    rng = random.Random(f"{seed}:history")
    horizon = max(0.0, before) * 1_000_000
    pts, qs = [], []
    for _ in range(n_points):
        t = int(rng.random() * horizon)
        pts.append(w.sample_point(t, rng))
    for _ in range(n_queries):
        t = int(rng.random() * horizon)
        u, v = w.sample_unit(t, rng)
        qs.append(query_rect(u, v, spec.query_side_frac, spec.grid))
    return HistorySample(pts, qs)


@dataclass
class HistoryPlan:
    grid: CellGrid
    iterations: int
    machine_costs: dict[int, int]
    stop_reason: str
    log: list[str] = field(default_factory=list)


def _exact_stats(bounds: CellRect, sample: HistorySample) -> StatsMatrix:
    pts = [(x, y) for x, y in sample.points if bounds.contains(x, y)]
    return stats_from_arrivals(bounds, pts, sample.queries)


def balance_offline(
    grid: CellGrid,
    sample: HistorySample,
    executors: int,
    tolerance: float = 0.10,
    max_iterations: int = 200,
) -> HistoryPlan:
    """Repeat the lazy reduction step offline, on exact sample statistics,
    until every machine is within ``tolerance`` of the mean cost."""
    grid = grid.copy()
    ids = IdAllocator()
    for pid in grid.table:
        ids.observe(pid)
    cache: dict[int, StatsMatrix] = {}

    def stats(ref: PartitionRef) -> StatsMatrix:
        if ref.partition_id not in cache:
            cache[ref.partition_id] = _exact_stats(ref.bounds, sample)
        return cache[ref.partition_id]

    log: list[str] = []
    reason = "iteration cap"
    costs: dict[int, int] = {}
    it = 0
    for it in range(max_iterations + 1):
        costs = {m: 0 for m in range(1, executors + 1)}
        r_s = 0
        for ref in grid.partitions():
            t = totals(stats(ref))
            costs[ref.machine_id] += partition_cost_num(t)
            r_s += t[2]
        mean = sum(costs.values()) / executors
        if all(abs(c - mean) <= tolerance * mean for c in costs.values()):
            reason = "balanced"
            break
        if it == max_iterations:
            break
        m_low = min(costs, key=lambda m: (costs[m], m))
        applied = False
        for m_high in sorted(costs, key=lambda m: (-costs[m], m)):
            if costs[m_high] <= costs[m_low]:
                break
            owned = [OwnedPartition(ref, stats(ref)) for ref in grid.machine_partitions(m_high)]
            block = max(2, len(owned))
            first = ids.take(block)
            outcome = reduce_workload(ReduceRequest(costs[m_low], r_s, first, m_low, block), owned)
            if isinstance(outcome, Infeasible):
                continue
            if isinstance(outcome, SubsetMove):
                removed = list(outcome.partition_ids)
                added = [
                    PartitionRef(first + i, grid.table[pid].bounds, m_low) for i, pid in enumerate(removed)
                ]
                for pid, ref in zip(removed, added):
                    cache[ref.partition_id] = cache[pid]
            else:
                assert isinstance(outcome, SplitMove)
                removed = [outcome.parent_id]
                added = [outcome.moved_child, outcome.kept_child]
            grid.apply_plan_update(PlanUpdate(removed, added, it))
            log.append(f"iteration {it}: m{m_high} -> m{m_low} {type(outcome).__name__} {removed} -> {[a.partition_id for a in added]}")
            applied = True
            break
        if not applied:
            reason = "no improving move"
            break
    return HistoryPlan(grid, it, costs, reason, log)


def static_history_plan(spec: WorkloadSpec, config, strategy) -> HistoryPlan:
    sample = history_sample(
        spec, config.seed, strategy.history_points, strategy.history_queries, strategy.history_duration
    )
    start = init_partitioning(config.executors, tuple(config.grid))
    return balance_offline(start, sample, config.executors, strategy.balance_tolerance, strategy.max_history_iterations)
