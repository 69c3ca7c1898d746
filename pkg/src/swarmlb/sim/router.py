"""GlobalIndex machines. Router 0 doubles as the Coordinator."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from ..baselines import RoundRobin, replicated_route
from ..cost import MachineCostReport, aggregate
from ..global_index import CellGrid, IdAllocator, PlanUpdateError, RoutingError
from ..rebalancer import Decision, DecisionState, ReduceRequest, decide
from .core import (
    ChainAck,
    ChainRequest,
    ChainResult,
    CostReportMsg,
    DataPoint,
    ExpiredAck,
    ManualMoveMsg,
    MergeDone,
    MergeRequest,
    PlanUpdateMsg,
    QueryInfo,
    QueryMsg,
    ReduceFailed,
    ReduceRequestMsg,
    RegisterQuery,
    UpdateDone,
)

if TYPE_CHECKING:
    from .config import ManualMove
    from .engine import Simulation


@dataclass
class SnapshotTracker:
    query: QueryInfo
    expected: set = field(default_factory=set)
    acked: set = field(default_factory=set)
    announced: int = 0
    received: int = 0
    total: int = 0

    def complete(self) -> bool:
        return self.acked == self.expected and self.received == self.announced


class Router:
    def __init__(self, sim: Simulation, index: int, grid: CellGrid | None):
        self.sim = sim
        self.index = index
        self.addr = ("router", index)
        self.grid = grid
        self.replicated = grid is None
        self._rr = RoundRobin(sim.config.executors)
        self._updates: deque[PlanUpdateMsg] = deque()
        self._steps = None
        self.deferred: list[QueryInfo] = []
        self.trackers: dict[int, SnapshotTracker] = {}
        self._token = 0
        self._dispatch = {
            DataPoint: self.on_tuple,
            QueryMsg: self.on_query,
            PlanUpdateMsg: self.on_plan_update,
            ChainResult: self.on_chain_result,
            ChainAck: self.on_chain_ack,
            ExpiredAck: self.on_expired_ack,
        }

    def handle(self, src, msg) -> None:
        self._dispatch[type(msg)](msg)

    @property
    def transitioning(self) -> bool:
        return self._steps is not None

    # -- routing --------------------------------------------------------

    def on_tuple(self, msg: DataPoint) -> None:
        sim = self.sim
        if self.replicated:
            (m,) = replicated_route("point", sim.config.executors, self._rr)
            msg.pid = m
            sim.net.send(self.addr, ("exec", m), msg)
            return
        try:
            ref = self.grid.route_point((msg.x, msg.y))
        except RoutingError:
            sim.metrics.bin(sim.loop.now).dropped += 1
            sim.metrics.totals["dropped"] += 1
            return
        msg.pid = ref.partition_id
        sim.net.send(self.addr, ("exec", ref.machine_id), msg)

    def on_query(self, msg: QueryMsg) -> None:
        q = msg.query
        if q.kind == "snapshot":
            if self.transitioning:
                self.deferred.append(q)
            else:
                self._start_snapshot(q)
            return
        sim = self.sim
        if self.replicated:
            for m in replicated_route("query", sim.config.executors, self._rr):
                sim.net.send(self.addr, ("exec", m), RegisterQuery(q, m))
            return
        clip = self.grid.clip(q.rect)
        if clip is None:
            sim.metrics.totals["dropped_queries"] += 1
            return
        for ref in sorted(self.grid.query_overlap(clip), key=lambda r: r.partition_id):
            sim.net.send(self.addr, ("exec", ref.machine_id), RegisterQuery(q, ref.partition_id))

    # -- snapshot queries ---------------------------------------------

    def _start_snapshot(self, q: QueryInfo) -> None:
        sim = self.sim
        tracker = SnapshotTracker(q)
        self.trackers[q.query_id] = tracker
        if self.replicated:
            targets = [(m, m, q.rect) for m in range(1, sim.config.executors + 1)]
        else:
            clip = self.grid.clip(q.rect)
            targets = []
            if clip is not None:
                for ref in sorted(self.grid.query_overlap(clip), key=lambda r: r.partition_id):
                    targets.append((ref.machine_id, ref.partition_id, ref.bounds.intersection(clip)))
        for machine, pid, region in targets:
            self._token += 1
            tok = (-self.index - 1, self._token)
            tracker.expected.add(tok)
            sim.net.send(self.addr, ("exec", machine), ChainRequest(q.query_id, tok, pid, region, self.addr, None, sim.loop.now))
        self._check_tracker(tracker)

    def _check_tracker(self, t: SnapshotTracker) -> None:
        if t.complete():
            del self.trackers[t.query.query_id]
            self.sim.metrics.snapshot_answers.append((t.query.query_id, self.sim.loop.now, t.total))
            self.sim.metrics.snapshot_members[t.query.query_id] = len(t.expected)

    def on_chain_result(self, msg: ChainResult) -> None:
        t = self.trackers[msg.query_id]
        t.received += 1
        t.total += msg.count
        self._check_tracker(t)

    def on_chain_ack(self, msg: ChainAck) -> None:
        t = self.trackers[msg.query_id]
        t.acked.add(msg.token)
        t.expected.update(msg.next)
        t.announced += msg.result_count
        self._check_tracker(t)

    def on_expired_ack(self, msg: ExpiredAck) -> None:
        t = self.trackers[msg.query_id]
        t.acked.add(msg.token)
        self._check_tracker(t)

    # -- index updates -------------------------------------------------

    def on_plan_update(self, msg: PlanUpdateMsg) -> None:
        self._updates.append(msg)
        if not self.transitioning:
            self._next_update()

    def _next_update(self) -> None:
        if not self._updates:
            deferred, self.deferred = self.deferred, []
            for q in deferred:
                self._start_snapshot(q)
            return
        msg = self._updates.popleft()
        self._steps = self.grid.plan_update_steps(msg.update)
        self._chunk()

    def _chunk(self) -> None:
        sim = self.sim
        n = sim.config.update_chunk
        done = False
        for _ in range(n):
            if next(self._steps, None) is None:
                done = True
                break
        if sim.options.check_tiling:
            self.grid.check_cell_references()
        if not done:
            sim.loop.after(sim.update_chunk_delay_us, self._chunk)
            return
        self._steps = None
        if sim.options.check_tiling:
            self.grid.check_tiling()
        self._update_done()
        self._next_update()

    def _update_done(self) -> None:
        self.sim.net.send(self.addr, ("router", 0), UpdateDone(self.index))


class Coordinator(Router):
    def __init__(self, sim: Simulation, grid: CellGrid | None, rebalancing: bool, merges: bool):
        super().__init__(sim, 0, grid)
        self.rebalancing = rebalancing and grid is not None
        self.merges = merges and self.rebalancing
        self.state = DecisionState(beta=sim.config.beta)
        self.reports: dict[int, dict[int, CostReportMsg]] = {}
        self.ids = IdAllocator()
        if grid is not None:
            for pid in grid.table:
                self.ids.observe(pid)
        self.busy: str | None = None
        self.awaiting: set[int] = set()
        self.trace: list[dict] = []
        self.manual: deque[ManualMove] = deque()
        self.merge_queue: deque[int] = deque()
        self._esc: dict | None = None
        self._dispatch.update(
            {
                CostReportMsg: self.on_report,
                ReduceFailed: self.on_reduce_failed,
                MergeDone: self.on_merge_done,
                UpdateDone: self.on_update_done,
            }
        )

    # -- rounds ---------------------------------------------------------

    def on_report(self, msg: CostReportMsg) -> None:
        got = self.reports.setdefault(msg.round, {})
        got[msg.machine] = msg
        if len(got) == self.sim.config.executors:
            del self.reports[msg.round]
            self._round(msg.round, got)

    def _round(self, k: int, got: dict[int, CostReportMsg]) -> None:
        sim = self.sim
        now = sim.loop.now
        view = aggregate(
            [MachineCostReport(m.machine, m.num_cost, m.r_m, m.round) for m in got.values()],
            expected=range(1, sim.config.executors + 1),
        )
        b = sim.metrics.bin(now)
        b.rounds += 1
        b.stats_bytes_decentralized += sim.stats_bytes("decentralized")
        b.stats_bytes_centralized += sim.stats_bytes("centralized")
        sim.metrics.on_costs(now, dict(view.num_costs))
        row = {
            "round": k,
            "time_s": now / 1_000_000,
            "r_s": view.r_s,
            "stage": self.state.stage,
            "decision": Decision.DO_NOTHING.value,
            "m_H": view.m_high,
            "m_L": view.m_low,
            "outcome": "none",
        }
        self.trace.append(row)
        if view.r_s == 0:
            row["outcome"] = "idle"
            return
        decision, self.state = decide(self.state, view.r_s)
        row["stage"] = self.state.stage
        row["decision"] = decision.value
        if decision is not Decision.REBALANCE:
            return
        if not self.rebalancing:
            row["outcome"] = "disabled"
            return
        if self.busy is not None:
            row["outcome"] = "busy"
            return
        m_low = view.m_low
        candidates = [m for m in view.ranked if m != m_low][: sim.config.executors - 1]
        if not candidates or view.num_costs[candidates[0]] <= view.num_costs[m_low]:
            row["outcome"] = "balanced"
            return
        self._esc = {
            "round": k,
            "row": row,
            "candidates": candidates,
            "next": 0,
            "m_L": m_low,
            "c_mL": view.num_costs[m_low],
            "r_s": view.r_s,
            "costs": dict(view.num_costs),
        }
        self.busy = "reduce"
        self._try_next_machine()

    def _try_next_machine(self) -> None:
        esc = self._esc
        while esc["next"] < len(esc["candidates"]):
            m = esc["candidates"][esc["next"]]
            esc["next"] += 1
            if esc["costs"][m] <= esc["c_mL"]:
                break
            row = esc["row"]
            row["m_H"] = m
            block = max(2, len(self.grid.machine_partitions(m)))
            first = self.ids.take(block)
            req = ReduceRequest(esc["c_mL"], esc["r_s"], first, esc["m_L"], block)
            self.sim.net.send(self.addr, ("exec", m), ReduceRequestMsg(esc["round"], req))
            return
        esc["row"]["outcome"] = "infeasible"
        self._esc = None
        self._release()

    def on_reduce_failed(self, msg: ReduceFailed) -> None:
        if msg.round < 0:  # manual move that found nothing to move
            self._release()
            return
        self._try_next_machine()

    # -- plan changes -----------------------------------------------------

    def on_plan_update(self, msg: PlanUpdateMsg) -> None:
        if msg.source < 0:
            # fan-out copy addressed to a router; the Coordinator never receives these
            return super().on_plan_update(msg)
        sim = self.sim
        try:
            self.grid.validate_update(msg.update)
        except PlanUpdateError as exc:
            sim.ledger.violation(f"rejected plan update from m{msg.source}: {exc}")
            sim.metrics.totals["rejected_updates"] += 1
            if self._esc is not None:
                self._esc["row"]["outcome"] = "rejected"
                self._esc = None
            self._release()
            return
        if self._esc is not None and msg.kind in ("subset", "split"):
            self._esc["row"]["outcome"] = msg.kind
            self._esc = None
        moved = sum(1 for a in msg.update.added if a.machine_id != msg.source)
        b = sim.metrics.bin(sim.loop.now)
        b.plan_changes += 1
        b.partitions_moved += moved
        sim.metrics.totals[f"plan_changes_{msg.kind}"] += 1
        sim.metrics.totals["plan_changes"] += 1
        self.awaiting = set(range(sim.config.routers))
        fanout = PlanUpdateMsg(msg.update, msg.kind, -1)
        for r in range(1, sim.config.routers):
            sim.net.send(self.addr, ("router", r), fanout)
        super().on_plan_update(fanout)

    def on_update_done(self, msg: UpdateDone) -> None:
        self.awaiting.discard(msg.router)
        if not self.awaiting:
            self._release()

    def _release(self) -> None:
        self.busy = None
        self._run_pending()

    def on_merge_done(self, msg: MergeDone) -> None:
        self._release()

    # -- scheduled work -----------------------------------------------------

    def schedule_manual(self, move: ManualMove) -> None:
        self.manual.append(move)
        self._run_pending()

    def start_merge_sweep(self) -> None:
        if not self.merges:
            return
        self.merge_queue.extend(m for m in range(1, self.sim.config.executors + 1) if m not in self.merge_queue)
        self._run_pending()

    def _run_pending(self) -> None:
        sim = self.sim
        while self.busy is None:
            if self.manual:
                mv = self.manual.popleft()
                ref = self.grid.route_point(mv.cell)
                if ref.machine_id == mv.target:
                    continue
                first = self.ids.take(2)
                self.busy = "manual"
                sim.net.send(self.addr, ("exec", ref.machine_id), ManualMoveMsg(ref.partition_id, mv.target, first, mv.split))
                return
            if self.merge_queue:
                m = self.merge_queue.popleft()
                n = len(self.grid.machine_partitions(m))
                if n < 2:
                    continue
                first = self.ids.take(n)
                self.busy = "merge"
                sim.net.send(self.addr, ("exec", m), MergeRequest(first, n))
                return
            return
