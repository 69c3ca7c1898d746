"""Event loop, FIFO network and message types of the simulator."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

from ..geometry import CellRect
from ..global_index import PartitionRef, PlanUpdate
from ..rebalancer import ReduceRequest
from ..stats import StatsMatrix

Address = tuple[str, int]  # ("exec", i) | ("router", i) | ("source", 0)


class EventLoop:
    """Single-threaded scheduler ordered by (virtual microsecond, insertion seq)."""

    def __init__(self) -> None:
        self.now = 0
        self._heap: list[tuple[int, int, Callable[..., None], tuple]] = []
        self._seq = 0
        self.processed = 0

    def at(self, time: int, fn: Callable[..., None], *args: Any) -> None:
        if time < self.now:
            raise ValueError(f"cannot schedule in the past ({time} < {self.now})")
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, fn, args))

    def after(self, delay: int, fn: Callable[..., None], *args: Any) -> None:
        self.at(self.now + delay, fn, *args)

    def pending(self) -> int:
        return len(self._heap)

    def run(self, until: int | None = None) -> None:
        heap = self._heap
        while heap:
            if until is not None and heap[0][0] > until:
                break
            time, _, fn, args = heapq.heappop(heap)
            self.now = time
            self.processed += 1
            fn(*args)


# -- messages ---------------------------------------------------------------

HEADER_BYTES = 16
STAT_FIELDS = 5


@dataclass
class Message:
    def size(self) -> int:
        return HEADER_BYTES


@dataclass
class DataPoint(Message):
    tuple_id: int
    x: int
    y: int
    inject_time: int
    pid: int = 0  # partition the sender believes owns the cell
    hops: int = 0

    def size(self) -> int:
        return HEADER_BYTES + 32


@dataclass(frozen=True)
class QueryInfo:
    query_id: int
    rect: CellRect
    kind: str
    inject_time: int
    active_time: int


@dataclass
class QueryMsg(Message):
    """A query as it travels from a source to a router."""

    query: QueryInfo

    def size(self) -> int:
        return HEADER_BYTES + 48


@dataclass
class RegisterQuery(Message):
    """A continuous query addressed to one partition."""

    query: QueryInfo
    pid: int

    def size(self) -> int:
        return HEADER_BYTES + 56


@dataclass
class CostReportMsg(Message):
    machine: int
    round: int
    num_cost: int
    r_m: int

    def size(self) -> int:
        return HEADER_BYTES + 2 * 8


@dataclass
class ReduceRequestMsg(Message):
    round: int
    request: ReduceRequest

    def size(self) -> int:
        return HEADER_BYTES + 4 * 8


@dataclass
class ReduceFailed(Message):
    round: int
    machine: int


@dataclass(frozen=True)
class LineageLink:
    parent_pid: int
    prev_machine: int
    parent_bounds: CellRect
    created: int = 0


@dataclass
class MovedPartition:
    ref: PartitionRef
    stats: StatsMatrix
    queries: list[QueryInfo]
    lineage: list[LineageLink]

    def size(self) -> int:
        e = self.stats.extent
        return 32 + STAT_FIELDS * 8 * (e.width + e.height) + 56 * len(self.queries) + 40 * len(self.lineage)


@dataclass
class PartitionMoveMsg(Message):
    round: int
    source: int
    partitions: list[MovedPartition]
    update: PlanUpdate
    kind: str  # subset | split | manual

    def size(self) -> int:
        return HEADER_BYTES + sum(p.size() for p in self.partitions)


@dataclass
class MoveAck(Message):
    round: int
    update: PlanUpdate
    kind: str


@dataclass
class PlanUpdateMsg(Message):
    update: PlanUpdate
    kind: str
    source: int

    def size(self) -> int:
        return HEADER_BYTES + 8 * len(self.update.removed) + 40 * len(self.update.added)


@dataclass
class UpdateDone(Message):
    router: int


@dataclass
class MergeRequest(Message):
    first_id: int
    block: int


@dataclass
class MergeDone(Message):
    machine: int


@dataclass
class ManualMoveMsg(Message):
    pid: int
    target: int
    first_id: int
    split: bool = False


@dataclass
class ChainRequest(Message):
    """Ask the holder of ``pid`` to count retained points in ``region``."""

    query_id: int
    token: tuple[int, int]
    pid: int
    region: CellRect
    origin: Address
    requester: tuple[int, int] | None  # (machine, pid) that consulted its lineage
    eval_time: int = 0

    def size(self) -> int:
        return HEADER_BYTES + 64


@dataclass
class ChainResult(Message):
    query_id: int
    token: tuple[int, int]
    count: int

    def size(self) -> int:
        return HEADER_BYTES + 24


@dataclass
class ChainAck(Message):
    query_id: int
    token: tuple[int, int]
    result_count: int
    next: list[tuple[int, int]] = field(default_factory=list)

    def size(self) -> int:
        return HEADER_BYTES + 24 + 16 * len(self.next)


@dataclass
class ExpiredAck(Message):
    query_id: int
    token: tuple[int, int]
    parent_pid: int
    requester_pid: int = 0


class Network:
    """FIFO point-to-point channels with seeded uniform per-hop latency."""

    def __init__(self, loop: EventLoop, rng: random.Random, latency_us: tuple[int, int], on_send=None):
        lo, hi = latency_us
        if lo < 0 or hi < lo:
            raise ValueError(f"bad latency range {latency_us}")
        self.loop = loop
        self.rng = rng
        self.lo = lo
        self.hi = hi
        self.handlers: dict[Address, Callable[[Address, Message], None]] = {}
        self._last: dict[tuple[Address, Address], int] = {}
        self.on_send = on_send

    def register(self, addr: Address, handler: Callable[[Address, Message], None]) -> None:
        self.handlers[addr] = handler

    def send(self, src: Address, dst: Address, msg: Message) -> None:
        handler = self.handlers[dst]
        now = self.loop.now
        if src == dst:
            deliver = now
        else:
            deliver = now + (self.lo if self.lo == self.hi else self.rng.randint(self.lo, self.hi))
            key = (src, dst)
            last = self._last.get(key, 0)
            if deliver < last:
                deliver = last
            self._last[key] = deliver
        if self.on_send is not None:
            self.on_send(src, dst, msg)
        self.loop.at(deliver, handler, src, msg)
