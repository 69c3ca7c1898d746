"""Executor machines: local partition map, tuple processing, statistics,
workload reduction, partition moves and chain answers."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from ..cost import machine_report
from ..geometry import CellRect
from ..global_index import PartitionRef, PlanUpdate, split_rect
from ..rebalancer import (
    Infeasible,
    OwnedPartition,
    SplitMove,
    SubsetMove,
    merge_adjacent,
    reduce_workload,
)
from ..stats import Axis, StatsMatrix, derive_child_stats, finalize_round, record_point, record_query, totals
from .core import (
    ChainAck,
    ChainRequest,
    ChainResult,
    DataPoint,
    ExpiredAck,
    LineageLink,
    ManualMoveMsg,
    MergeDone,
    MergeRequest,
    MoveAck,
    MovedPartition,
    PartitionMoveMsg,
    PlanUpdateMsg,
    QueryInfo,
    ReduceFailed,
    ReduceRequestMsg,
    RegisterQuery,
    CostReportMsg,
)

if TYPE_CHECKING:
    from .engine import Simulation


@dataclass
class LocalPartition:
    ref: PartitionRef
    stats: StatsMatrix
    lineage: list[LineageLink] = field(default_factory=list)
    queries: dict[int, QueryInfo] = field(default_factory=dict)
    cell_queries: dict[tuple[int, int], list[QueryInfo]] = field(default_factory=dict)
    store: deque = field(default_factory=deque)  # (inject_time, x, y) in processing order

    def add_query(self, q: QueryInfo) -> CellRect | None:
        """Register ``q``; returns its clip on first registration, else ``None``."""
        if q.query_id in self.queries:
            return None
        clip = q.rect.intersection(self.ref.bounds)
        if clip is None:
            return None
        self.queries[q.query_id] = q
        index = self.cell_queries
        for y in range(clip.top, clip.bottom + 1):
            for x in range(clip.left, clip.right + 1):
                index.setdefault((x, y), []).append(q)
        return clip


@dataclass
class RetiredRecord:
    """Metadata kept for a partition that moved, split or merged away."""

    ref: PartitionRef
    store: deque
    lineage: list[LineageLink]
    children: list[PartitionRef]
    retire_time: int
    retire_round: int


def count_region(store, region: CellRect, cutoff: int | None) -> int:
    l, t, r, b = region
    n = 0
    for when, x, y in store:
        if l <= x <= r and t <= y <= b and (cutoff is None or when > cutoff):
            n += 1
    return n


class Executor:
    def __init__(self, sim: Simulation, machine_id: int):
        self.sim = sim
        self.id = machine_id
        self.addr = ("exec", machine_id)
        self.partitions: dict[int, LocalPartition] = {}
        self.retired: dict[int, RetiredRecord] = {}
        self.queue: deque[DataPoint] = deque()
        self.busy = False
        self.round = 0
        self._token = 0
        self.reductions = 0
        self.forwarded = 0
        self._dispatch = {
            DataPoint: self.on_tuple,
            RegisterQuery: self.on_register,
            ReduceRequestMsg: self.on_reduce,
            PartitionMoveMsg: self.on_move,
            MoveAck: self.on_move_ack,
            MergeRequest: self.on_merge,
            ManualMoveMsg: self.on_manual,
            ChainRequest: self.on_chain,
            ExpiredAck: self.on_expired_ack,
        }

    # -- plumbing -------------------------------------------------------

    def handle(self, src, msg) -> None:
        self._dispatch[type(msg)](msg)

    def send_exec(self, machine: int, msg) -> None:
        self.sim.net.send(self.addr, ("exec", machine), msg)

    def send_coord(self, msg) -> None:
        self.sim.net.send(self.addr, ("router", 0), msg)

    def install(self, ref: PartitionRef, stats: StatsMatrix, queries=(), lineage=()) -> LocalPartition:
        part = LocalPartition(ref, stats, list(lineage))
        for q in queries:
            part.add_query(q)
        self.partitions[ref.partition_id] = part
        return part

    def _retire(self, pid: int, children: list[PartitionRef]) -> LocalPartition:
        part = self.partitions.pop(pid)
        self.retired[pid] = RetiredRecord(part.ref, part.store, part.lineage, children, self.sim.loop.now, self.round)
        return part

    def _next_token(self) -> tuple[int, int]:
        self._token += 1
        return (self.id, self._token)

    def _expired(self, rec: RetiredRecord) -> bool:
        w = self.sim.window_us
        return w is not None and self.sim.loop.now - w > rec.retire_time

    def queue_length(self) -> int:
        return len(self.queue)

    # -- tuples ---------------------------------------------------------

    def _resolve(self, msg: DataPoint) -> LocalPartition | None:
        """Follow local retired records until the tuple's owner is found.

        Returns the local partition, or ``None`` after forwarding or on a
        violation.
        """
        pid = msg.pid
        cell_x, cell_y = msg.x, msg.y
        while True:
            part = self.partitions.get(pid)
            if part is not None:
                return part
            rec = self.retired.get(pid)
            if rec is None:
                self.sim.ledger.violation(f"tuple {msg.tuple_id} for unknown partition {pid} on m{self.id}")
                return None
            child = next((c for c in rec.children if c.bounds.contains(cell_x, cell_y)), None)
            if child is None:
                self.sim.ledger.violation(f"tuple {msg.tuple_id}: no child of {pid} holds its cell")
                return None
            if child.machine_id == self.id:
                pid = child.partition_id
                continue
            msg.pid = child.partition_id
            msg.hops += 1
            self.forwarded += 1
            self.send_exec(child.machine_id, msg)
            return None

    def on_tuple(self, msg: DataPoint) -> None:
        part = self._resolve(msg)
        if part is None:
            return
        msg.pid = part.ref.partition_id
        record_point(part.stats, msg.x, msg.y)
        self.queue.append(msg)
        b = self.sim.metrics.bin(self.sim.loop.now)
        if len(self.queue) > b.max_queue:
            b.max_queue = len(self.queue)
        if not self.busy:
            self._start_next()

    def _start_next(self) -> None:
        sim = self.sim
        while self.queue:
            msg = self.queue.popleft()
            part = self._resolve(msg)
            if part is None:
                continue
            matches = 0
            for q in part.cell_queries.get((msg.x, msg.y), ()):
                if q.active_time <= msg.inject_time:
                    matches += 1
            sim.ledger.process(msg.tuple_id, self.id, part.ref.partition_id, matches)
            part.store.append((msg.inject_time, msg.x, msg.y))
            b = sim.metrics.bin(sim.loop.now)
            b.processed += 1
            b.matches += matches
            checks = 1 + len(part.queries)
            self.busy = True
            sim.loop.after(sim.service_cost_us * checks, self._done, msg)
            return
        self.busy = False

    def _done(self, msg: DataPoint) -> None:
        self.sim.metrics.on_complete(self.sim.loop.now, self.sim.loop.now - msg.inject_time)
        self._start_next()

    # -- queries --------------------------------------------------------

    def on_register(self, msg: RegisterQuery) -> None:
        self._register(msg.query, msg.pid)

    def _register(self, q: QueryInfo, pid: int) -> None:
        part = self.partitions.get(pid)
        if part is not None:
            clip = part.add_query(q)
            if clip is not None:
                record_query(part.stats, clip)
            return
        rec = self.retired.get(pid)
        if rec is None:
            self.sim.ledger.violation(f"query {q.query_id} for unknown partition {pid} on m{self.id}")
            return
        for child in rec.children:
            if child.bounds.intersects(q.rect):
                if child.machine_id == self.id:
                    self._register(q, child.partition_id)
                else:
                    self.send_exec(child.machine_id, RegisterQuery(q, child.partition_id))

    # -- rounds ---------------------------------------------------------

    def on_round(self, k: int) -> None:
        sim = self.sim
        self.round = k
        w = sim.window_us
        now = sim.loop.now
        if w is not None:
            cutoff = now - w
            for part in self.partitions.values():
                store = part.store
                while store and store[0][0] <= cutoff:
                    store.popleft()
            for pid in [p for p, rec in self.retired.items() if self._expired(rec) and rec.retire_round < k]:
                del self.retired[pid]
        all_totals = []
        for pid in sorted(self.partitions):
            s = self.partitions[pid].stats
            finalize_round(s, sim.config.fade)
            all_totals.append(totals(s))
        rep = machine_report(self.id, all_totals, k)
        self.send_coord(CostReportMsg(self.id, k, rep.num_cost, rep.r_m))

    def retained_points(self, now: int | None = None) -> list[tuple[int, int, int]]:
        """Unexpired points held by this machine (live and retired partitions)."""
        now = self.sim.loop.now if now is None else now
        w = self.sim.window_us
        out = []
        for holder in list(self.partitions.values()) + list(self.retired.values()):
            for p in holder.store:
                if w is None or p[0] > now - w:
                    out.append(p)
        return out

    # -- reduction and moves ----------------------------------------------

    def owned(self) -> list[OwnedPartition]:
        return [OwnedPartition(p.ref, p.stats.copy()) for _, p in sorted(self.partitions.items())]

    def on_reduce(self, msg: ReduceRequestMsg) -> None:
        outcome = reduce_workload(msg.request, self.owned())
        self.reductions += 1
        self.sim.loop.after(self.sim.reduce_delay_us, self._finish_reduce, msg, outcome)

    def _finish_reduce(self, msg: ReduceRequestMsg, outcome) -> None:
        req = msg.request
        if isinstance(outcome, Infeasible):
            self.send_coord(ReduceFailed(msg.round, self.id))
            return
        if isinstance(outcome, SubsetMove):
            self._move_whole(list(outcome.partition_ids), req.target_machine, req.fresh_pid, msg.round, "subset")
            return
        assert isinstance(outcome, SplitMove)
        self._move_split(outcome, msg.round, "split")

    def _move_whole(self, pids: list[int], target: int, first_id: int, round_: int, kind: str) -> None:
        now = self.sim.loop.now
        moved, added = [], []
        for i, pid in enumerate(pids):
            part = self.partitions[pid]
            b = part.ref.bounds
            ref = PartitionRef(first_id + i, b, target)
            moved.append(MovedPartition(ref, part.stats.copy(), list(part.queries.values()), [LineageLink(pid, self.id, b, now)]))
            self._retire(pid, [ref])
            added.append(ref)
        update = PlanUpdate(list(pids), added, round_)
        self.send_exec(target, PartitionMoveMsg(round_, self.id, moved, update, kind))

    def _move_split(self, sm: SplitMove, round_: int, kind: str) -> None:
        now = self.sim.loop.now
        parent = self.partitions[sm.parent_id]
        b = parent.ref.bounds
        link = LineageLink(sm.parent_id, self.id, b, now)
        queries = list(parent.queries.values())
        self._retire(sm.parent_id, [sm.moved_child, sm.kept_child])
        kept = [q for q in queries if q.rect.intersects(sm.kept_child.bounds)]
        self.install(sm.kept_child, sm.kept_stats, kept, [link])
        moved_q = [q for q in queries if q.rect.intersects(sm.moved_child.bounds)]
        moved = MovedPartition(sm.moved_child, sm.moved_stats, moved_q, [link])
        update = PlanUpdate([sm.parent_id], [sm.moved_child, sm.kept_child], round_)
        self.send_exec(sm.moved_child.machine_id, PartitionMoveMsg(round_, self.id, [moved], update, kind))

    def on_move(self, msg: PartitionMoveMsg) -> None:
        for mp in msg.partitions:
            self.install(mp.ref, mp.stats, mp.queries, mp.lineage)
        self.send_exec(msg.source, MoveAck(msg.round, msg.update, msg.kind))

    def on_move_ack(self, msg: MoveAck) -> None:
        self.send_coord(PlanUpdateMsg(msg.update, msg.kind, self.id))

    def on_manual(self, msg: ManualMoveMsg) -> None:
        part = self.partitions.get(msg.pid)
        if part is None:
            self.send_coord(ReduceFailed(-1, self.id))
            return
        if not msg.split:
            self._move_whole([msg.pid], msg.target, msg.first_id, -1, "manual")
            return
        halves = split_rect(part.ref.bounds)
        if halves is None:
            self._move_whole([msg.pid], msg.target, msg.first_id, -1, "manual")
            return
        b = part.ref.bounds
        axis = Axis.COLS if halves[0].bottom == b.bottom else Axis.ROWS
        sp = (halves[0].right - b.left) if axis is Axis.COLS else (halves[0].bottom - b.top)
        first, second = derive_child_stats(part.stats, axis, sp)
        sm = SplitMove(
            parent_id=msg.pid,
            axis=axis,
            sp=sp,
            moved_child=PartitionRef(msg.first_id, halves[0], msg.target),
            kept_child=PartitionRef(msg.first_id + 1, halves[1], self.id),
            moved_stats=first,
            kept_stats=second,
            c_diff_num=0,
        )
        self._move_split(sm, -1, "manual")

    # -- merges ---------------------------------------------------------

    def on_merge(self, msg: MergeRequest) -> None:
        ids = iter(range(msg.first_id, msg.first_id + msg.block))
        before = set(self.partitions)
        plans = merge_adjacent(self.owned(), lambda: next(ids))
        if not plans:
            self.send_coord(MergeDone(self.id))
            return
        now = self.sim.loop.now
        for plan in plans:
            a, b = plan.sources
            pa, pb = self.partitions[a], self.partitions[b]
            queries = list(pa.queries.values()) + [q for q in pb.queries.values() if q.query_id not in pa.queries]
            lineage = [LineageLink(a, self.id, pa.ref.bounds, now), LineageLink(b, self.id, pb.ref.bounds, now)]
            self._retire(a, [plan.merged])
            self._retire(b, [plan.merged])
            self.install(plan.merged, plan.stats, queries, lineage)
        after = set(self.partitions)
        update = PlanUpdate(sorted(before - after), [self.partitions[p].ref for p in sorted(after - before)], self.round)
        self.send_coord(PlanUpdateMsg(update, "merge", self.id))

    # -- snapshot chains --------------------------------------------------

    def on_chain(self, msg: ChainRequest) -> None:
        sim = self.sim
        w = sim.window_us
        cutoff = None if w is None else sim.loop.now - w
        holder = self.partitions.get(msg.pid)
        rec = None
        if holder is None:
            rec = self.retired.get(msg.pid)
            if rec is None or self._expired(rec):
                if msg.requester is None:
                    sim.ledger.violation(f"snapshot {msg.query_id} routed to missing partition {msg.pid}")
                self._send_expired(msg)
                return
            if msg.requester is None:
                # routed before the routers learned of the change: hand over to the children,
                # which read this record's data through their lineage
                nxt = []
                for child in rec.children:
                    sub = child.bounds.intersection(msg.region)
                    if sub is None:
                        continue
                    tok = self._next_token()
                    nxt.append(tok)
                    req = ChainRequest(msg.query_id, tok, child.partition_id, sub, msg.origin, None, msg.eval_time)
                    self.sim.net.send(self.addr, ("exec", child.machine_id), req)
                sim.net.send(self.addr, msg.origin, ChainAck(msg.query_id, msg.token, 0, nxt))
                return
            holder = rec
        count = count_region(holder.store, msg.region, cutoff)
        nxt = []
        for link in list(holder.lineage):
            sub = link.parent_bounds.intersection(msg.region)
            if sub is None:
                continue
            tok = self._next_token()
            nxt.append(tok)
            req = ChainRequest(msg.query_id, tok, link.parent_pid, sub, msg.origin, (self.id, msg.pid), msg.eval_time)
            self.sim.net.send(self.addr, ("exec", link.prev_machine), req)
        if count:
            sim.net.send(self.addr, msg.origin, ChainResult(msg.query_id, msg.token, count))
        sim.net.send(self.addr, msg.origin, ChainAck(msg.query_id, msg.token, 1 if count else 0, nxt))

    def _send_expired(self, msg: ChainRequest) -> None:
        ack = ExpiredAck(msg.query_id, msg.token, msg.pid, msg.requester[1] if msg.requester else 0)
        self.sim.net.send(self.addr, msg.origin, ack)
        if msg.requester is not None:
            self.send_exec(msg.requester[0], ack)

    def on_expired_ack(self, msg: ExpiredAck) -> None:
        holder = self.partitions.get(msg.requester_pid) or self.retired.get(msg.requester_pid)
        if holder is None:
            return
        holder.lineage[:] = [l for l in holder.lineage if l.parent_pid != msg.parent_pid]
        self.sim.metrics.totals["chains_broken"] += 1
