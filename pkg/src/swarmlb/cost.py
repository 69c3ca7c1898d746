"""Partition and machine cost numerators, ranked at the Coordinator.

Every real cost shares the divisor R(S), so only numerators travel and all
comparisons stay in exact integer arithmetic. :class:`fractions.Fraction` is
used where a real value is actually needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping


class MissingReport(RuntimeError):
    """Aggregation attempted before every live executor reported."""


def partition_cost_num(totals: tuple[int, int, int]) -> int:
    n, q, r = totals
    return int(n) * int(q) * int(r)


@dataclass(frozen=True)
class PartitionCostNum:
    partition_id: int
    num: int


@dataclass(frozen=True)
class MachineCostReport:
    machine_id: int
    num_cost: int
    r_m: int
    round: int = 0

    def __add__(self, other: MachineCostReport) -> MachineCostReport:
        return MachineCostReport(self.machine_id, self.num_cost + other.num_cost, self.r_m + other.r_m, self.round)


def machine_report(machine_id: int, partition_totals: Iterable[tuple[int, int, int]], round: int = 0) -> MachineCostReport:
    """Sum N*Q*R and R over a machine's partitions: the two numbers it sends."""
    num = 0
    r_m = 0
    for t in partition_totals:
        num += partition_cost_num(t)
        r_m += int(t[2])
    return MachineCostReport(machine_id, num, r_m, round)


@dataclass(frozen=True)
class GlobalCostView:
    r_s: int
    ranked: tuple[int, ...]
    num_costs: Mapping[int, int]

    @property
    def m_high(self) -> int:
        return self.ranked[0]

    @property
    def m_low(self) -> int:
        # lowest id among the cheapest, not simply ranked[-1]
        return min(self.ranked, key=lambda m: (self.num_costs[m], m))

    @property
    def costs(self) -> dict[int, Fraction]:
        if self.r_s == 0:
            return {m: Fraction(0) for m in self.ranked}
        return {m: Fraction(self.num_costs[m], self.r_s) for m in self.ranked}


def aggregate(reports: Iterable[MachineCostReport], expected: Iterable[int] | None = None) -> GlobalCostView:
    reports = list(reports)
    if not reports:
        raise MissingReport("no reports")
    by_machine = {r.machine_id: r for r in reports}
    if len(by_machine) != len(reports):
        raise ValueError("duplicate report for a machine")
    if expected is not None:
        missing = set(expected) - set(by_machine)
        if missing:
            raise MissingReport(f"no report from machines {sorted(missing)}")
    rounds = {r.round for r in reports}
    if len(rounds) > 1:
        raise ValueError(f"reports from different rounds: {sorted(rounds)}")
    r_s = sum(r.r_m for r in reports)
    ranked = tuple(sorted(by_machine, key=lambda m: (-by_machine[m].num_cost, m)))
    return GlobalCostView(r_s, ranked, {m: by_machine[m].num_cost for m in ranked})
