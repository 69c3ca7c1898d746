"""Coordinator decision automaton and the hottest machine's reduction search."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence, Union

from .cost import partition_cost_num
from .geometry import CellRect
from .global_index import PartitionRef
from .stats import Axis, StatsMatrix, derive_child_stats, merge_stats, split_counts, split_extent, totals

STAGE_MIN = -2
STAGE_MAX = 2


class Decision(str, Enum):
    REBALANCE = "Rebalance"
    DO_NOTHING = "DoNothing"

    def flipped(self) -> Decision:
        return Decision.DO_NOTHING if self is Decision.REBALANCE else Decision.REBALANCE


@dataclass(frozen=True)
class DecisionState:
    stage: int = 0
    prev_decision: Decision = Decision.DO_NOTHING
    repeat_count: int = 0
    pre_r_s: int = 0
    beta: int = 20


def decide(state: DecisionState, r_s: int) -> tuple[Decision, DecisionState]:
    """One round of the five-stage pointer.

    The pointer moves right when R(S) grew, left otherwise, and saturates at
    the right end. Reaching the leftmost stage, or having applied the same
    decision ``beta`` times, flips the decision and resets the pointer.
    """
    stage = state.stage + 1 if r_s > state.pre_r_s else state.stage - 1
    stage = min(stage, STAGE_MAX)
    if stage <= STAGE_MIN or state.repeat_count >= state.beta:
        decision = state.prev_decision.flipped()
        return decision, replace(state, stage=0, prev_decision=decision, repeat_count=1, pre_r_s=r_s)
    decision = state.prev_decision
    return decision, replace(state, stage=stage, repeat_count=state.repeat_count + 1, pre_r_s=r_s)


# -- subset move ---------------------------------------------------------------


def find_subset(partitions: Sequence[tuple[int, int]], c_mH: int, c_mL: int) -> list[int]:
    """Greedy subset sum over ``(partition_id, cost_num)`` with budget
    ``(c_mH - c_mL) / 2``. Compared doubled to stay in integers."""
    budget2 = c_mH - c_mL
    if budget2 <= 0:
        return []
    taken: list[int] = []
    total = 0
    for pid, cost in sorted(partitions, key=lambda item: (-item[1], item[0])):
        if cost <= 0:
            continue
        if 2 * (total + cost) <= budget2:
            total += cost
            taken.append(pid)
            if 2 * total == budget2:
                break
    return taken


# -- split search --------------------------------------------------------------


class MoveSide(str, Enum):
    FIRST = "first"  # top or left part moves to m_L
    SECOND = "second"


@dataclass(frozen=True)
class SplitCandidate:
    axis: Axis
    sp: int
    move_side: MoveSide
    diff_num: int
    r_s: int
    probes: int = 0
    searches: int = 0

    @property
    def c_diff(self) -> Fraction:
        return Fraction(self.diff_num, self.r_s) if self.r_s else Fraction(self.diff_num)


def c_diff_num(s: StatsMatrix, axis: Axis, sp: int, side: MoveSide, c_mH: int, c_mL: int, c_p: int) -> int:
    """Predicted m_H minus m_L cost numerator after cutting ``p`` after ``sp``."""
    n1, q1, r1, n2, q2, r2 = split_counts(s, axis, sp)
    c1 = n1 * q1 * r1
    c2 = n2 * q2 * r2
    moved, kept = (c1, c2) if side is MoveSide.FIRST else (c2, c1)
    return (c_mH - c_p + kept) - (c_mL + moved)


def _binary_search(evaluate: Callable[[int], int], n_points: int, side: MoveSide) -> tuple[int, dict[int, int]]:
    """Locate the sign change of a monotone C_diff over split indices ``0..n_points-1``.

    Moving the first part makes C_diff non-increasing in ``sp``; moving the
    second makes it non-decreasing. Returns the probed index with the least
    ``|C_diff|`` and all probes.
    """
    sign = 1 if side is MoveSide.FIRST else -1
    probed: dict[int, int] = {}

    def probe(i: int) -> int:
        if i not in probed:
            probed[i] = evaluate(i)
        return probed[i]

    lo, hi = 0, n_points
    while lo < hi:
        mid = (lo + hi) // 2
        v = probe(mid)
        if v == 0:
            return mid, probed
        if sign * v <= 0:
            hi = mid
        else:
            lo = mid + 1
    for i in (lo - 1, lo):
        if 0 <= i < n_points:
            probe(i)
    best = min(probed, key=lambda i: (abs(probed[i]), i))
    return best, probed


def find_split(s: StatsMatrix, c_mH: int, c_mL: int, c_p: int, r_s: int) -> SplitCandidate | None:
    best: SplitCandidate | None = None
    probes = 0
    searches = 0
    for axis in (Axis.ROWS, Axis.COLS):
        n_points = len(s.axis(axis)) - 1
        if n_points < 1:
            continue
        for side in (MoveSide.FIRST, MoveSide.SECOND):
            searches += 1
            sp, probed = _binary_search(
                lambda i: c_diff_num(s, axis, i, side, c_mH, c_mL, c_p), n_points, side
            )
            probes += len(probed)
            diff = probed[sp]
            if best is None or abs(diff) < abs(best.diff_num):
                best = SplitCandidate(axis, sp, side, diff, r_s)
            if diff == 0:
                return replace(best, probes=probes, searches=searches)
    if best is None:
        return None
    return replace(best, probes=probes, searches=searches)


# -- workload reduction --------------------------------------------------------


@dataclass(frozen=True)
class ReduceRequest:
    c_mL: int
    r_s: int
    fresh_pid: int
    target_machine: int
    id_block: int = 2


@dataclass
class OwnedPartition:
    ref: PartitionRef
    stats: StatsMatrix

    @property
    def cost(self) -> int:
        return partition_cost_num(totals(self.stats))


@dataclass(frozen=True)
class SubsetMove:
    partition_ids: tuple[int, ...]


@dataclass(frozen=True)
class SplitMove:
    parent_id: int
    axis: Axis
    sp: int
    moved_child: PartitionRef
    kept_child: PartitionRef
    moved_stats: StatsMatrix
    kept_stats: StatsMatrix
    c_diff_num: int


@dataclass(frozen=True)
class Infeasible:
    reason: str = ""


ReductionOutcome = Union[SubsetMove, SplitMove, Infeasible]


def reduce_workload(req: ReduceRequest, owned: Sequence[OwnedPartition]) -> ReductionOutcome:
    """Try a subset move first, then a split of the costliest splittable
    partition that narrows the m_H/m_L gap."""
    costs = {p.ref.partition_id: p.cost for p in owned}
    c_mH = sum(costs.values())
    subset = find_subset(list(costs.items()), c_mH, req.c_mL)
    if subset:
        return SubsetMove(tuple(subset))
    gap = abs(c_mH - req.c_mL)
    for p in sorted(owned, key=lambda o: (-costs[o.ref.partition_id], o.ref.partition_id)):
        b = p.ref.bounds
        if b.width == 1 and b.height == 1:
            continue
        cand = find_split(p.stats, c_mH, req.c_mL, costs[p.ref.partition_id], req.r_s)
        if cand is None or abs(cand.diff_num) >= gap:
            continue
        first, second = derive_child_stats(p.stats, cand.axis, cand.sp)
        e1, e2 = split_extent(b, cand.axis, cand.sp)
        if cand.move_side is MoveSide.FIRST:
            moved_rect, kept_rect, moved_stats, kept_stats = e1, e2, first, second
        else:
            moved_rect, kept_rect, moved_stats, kept_stats = e2, e1, second, first
        return SplitMove(
            parent_id=p.ref.partition_id,
            axis=cand.axis,
            sp=cand.sp,
            moved_child=PartitionRef(req.fresh_pid, moved_rect, req.target_machine),
            kept_child=PartitionRef(req.fresh_pid + 1, kept_rect, p.ref.machine_id),
            moved_stats=moved_stats,
            kept_stats=kept_stats,
            c_diff_num=cand.diff_num,
        )
    return Infeasible("no subset within budget and no improving split")


# -- merging -------------------------------------------------------------------


@dataclass(frozen=True)
class MergePlan:
    sources: tuple[int, int]
    merged: PartitionRef
    stats: StatsMatrix


def merge_adjacent(owned: Sequence[OwnedPartition], next_id: Callable[[], int]) -> list[MergePlan]:
    """Repeatedly merge same-machine pairs whose union is a rectangle.

    Pairs are taken smallest id-sum first; merged partitions may merge again.
    """
    live: dict[int, OwnedPartition] = {p.ref.partition_id: p for p in owned}
    plans: list[MergePlan] = []
    while True:
        best: tuple[tuple[int, int], tuple[int, int], CellRect] | None = None
        ids = sorted(live)
        for i, a in enumerate(ids):
            pa = live[a].ref
            for b in ids[i + 1 :]:
                pb = live[b].ref
                if pa.machine_id != pb.machine_id:
                    continue
                union = pa.bounds.union_if_rect(pb.bounds)
                if union is None:
                    continue
                key = (a + b, a)
                if best is None or key < best[0]:
                    best = (key, (a, b), union)
        if best is None:
            return plans
        _, (a, b), union = best
        pa, pb = live.pop(a), live.pop(b)
        ref = PartitionRef(next_id(), union, pa.ref.machine_id)
        stats = merge_stats(pa.stats, pb.stats)
        plans.append(MergePlan((a, b), ref, stats))
        live[ref.partition_id] = OwnedPartition(ref, stats)
