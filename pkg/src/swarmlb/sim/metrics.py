"""Integrity ledger and per-interval metric bins."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np


class IntegrityLedger:
    """Per-tuple record of injection and processing (tuple ids start at 1)."""

    def __init__(self) -> None:
        self.inject_time: list[int] = []
        self.cell: list[tuple[int, int]] = []
        self.processed: list[int] = []
        self.matches: list[int] = []
        self.where: list[tuple[int, int] | None] = []  # (machine, pid) of first processing
        self.violations: list[str] = []

    def inject(self, t: int, x: int, y: int) -> int:
        self.inject_time.append(t)
        self.cell.append((x, y))
        self.processed.append(0)
        self.matches.append(0)
        self.where.append(None)
        return len(self.inject_time)

    def process(self, tuple_id: int, machine: int, pid: int, matches: int) -> None:
        i = tuple_id - 1
        self.processed[i] += 1
        if self.processed[i] == 1:
            self.where[i] = (machine, pid)
            self.matches[i] = matches
        else:
            self.violations.append(f"tuple {tuple_id} processed {self.processed[i]} times")

    def violation(self, text: str) -> None:
        self.violations.append(text)

    @property
    def delivered(self) -> int:
        return len(self.inject_time)

    def count_histogram(self) -> Counter:
        return Counter(self.processed)

    def exactly_once(self) -> bool:
        return not self.violations and all(c == 1 for c in self.processed)


@dataclass
class IntervalBin:
    injected: int = 0
    processed: int = 0
    matches: int = 0
    latencies: list[int] = field(default_factory=list)
    plan_changes: int = 0
    partitions_moved: int = 0
    messages: int = 0
    bytes: int = 0
    rounds: int = 0
    dropped: int = 0
    max_queue: int = 0
    stats_bytes_decentralized: int = 0
    stats_bytes_centralized: int = 0


class MetricsCollector:
    def __init__(self, interval_us: int, executors: int):
        self.interval_us = interval_us
        self.executors = executors
        self.bins: dict[int, IntervalBin] = {}
        self.machine_costs: dict[int, dict[int, int]] = {}  # bin -> machine -> last num cost
        self.inject_rate: dict[int, float] = {}
        self.message_kinds: Counter = Counter()
        self.query_times: list[int] = []  # injection time of each continuous query
        self.snapshot_answers: list[tuple[int, int, int]] = []  # (query id, eval time, answer)
        self.snapshot_members: dict[int, int] = {}  # query id -> chain requests it took
        self.totals = Counter()

    def bin(self, t: int) -> IntervalBin:
        k = t // self.interval_us
        b = self.bins.get(k)
        if b is None:
            b = self.bins[k] = IntervalBin()
        return b

    def on_message(self, t: int, kind: str, size: int) -> None:
        b = self.bin(t)
        b.messages += 1
        b.bytes += size
        self.message_kinds[kind] += 1
        self.totals["messages"] += 1
        self.totals["bytes"] += size

    def on_complete(self, t: int, latency: int) -> None:
        self.bin(t).latencies.append(latency)

    def on_costs(self, t: int, costs: dict[int, int]) -> None:
        self.machine_costs[t // self.interval_us] = dict(costs)

    def rows(self, duration_us: int, machines: list[int]) -> list[dict]:
        n_bins = max(1, -(-duration_us // self.interval_us))
        queries = np.sort(np.asarray(self.query_times, dtype=np.int64))
        last_costs: dict[int, int] = {m: 0 for m in machines}
        last_rate = 0.0
        rows = []
        seconds = self.interval_us / 1_000_000
        for k in range(n_bins):
            b = self.bins.get(k, IntervalBin())
            start = k * self.interval_us
            end = min((k + 1) * self.interval_us, duration_us) if duration_us > start else (k + 1) * self.interval_us
            span = (end - start) / 1_000_000 or seconds
            q_sys = int(np.searchsorted(queries, end, side="left"))
            if k in self.machine_costs:
                last_costs.update(self.machine_costs[k])
            last_rate = self.inject_rate.get(k, last_rate)
            lat = np.asarray(b.latencies, dtype=np.float64) / 1000.0
            row = {
                "interval_start_s": start / 1_000_000,
                "interval_end_s": end / 1_000_000,
                "injected": b.injected,
                "processed": b.processed,
                "queries_in_system": q_sys,
                "units_of_work": q_sys * b.processed / span,
                "matches": b.matches,
                "mean_latency_ms": float(lat.mean()) if len(lat) else 0.0,
                "p95_latency_ms": float(np.percentile(lat, 95)) if len(lat) else 0.0,
                "plan_changes": b.plan_changes,
                "partitions_moved": b.partitions_moved,
                "rounds": b.rounds,
                "messages": b.messages,
                "bytes": b.bytes,
                "stats_bytes_decentralized": b.stats_bytes_decentralized,
                "stats_bytes_centralized": b.stats_bytes_centralized,
                "dropped": b.dropped,
                "inject_rate": last_rate,
                "max_queue": b.max_queue,
            }
            for m in machines:
                row[f"cost_m{m}"] = last_costs.get(m, 0)
            rows.append(row)
        return rows
