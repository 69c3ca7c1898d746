"""Grid routing index held by every GlobalIndex machine.

Each cell of a ``W x H`` matrix stores the id of the partition covering it, so
routing a point is a single lookup. Range queries use a stack-based traversal
that jumps over whole partitions instead of visiting every cell.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .geometry import CellCoord, CellRect


class RoutingError(LookupError):
    """A point fell outside the grid."""


class PlanUpdateError(ValueError):
    """A plan update does not tile the partitions it replaces."""


class InvalidConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class PartitionRef:
    partition_id: int
    bounds: CellRect
    machine_id: int


@dataclass
class PlanUpdate:
    removed: list[int]
    added: list[PartitionRef]
    origin_round: int = 0


@dataclass
class OverlapResult:
    partitions: list[PartitionRef]
    probes: int


class CellGrid:
    def __init__(self, width: int, height: int):
        if width < 1 or height < 1:
            raise InvalidConfiguration(f"grid must be at least 1x1, got {width}x{height}")
        self.width = width
        self.height = height
        # cells[y, x] -> partition id; 0 means unassigned
        self.cells = np.zeros((height, width), dtype=np.int64)
        self.table: dict[int, PartitionRef] = {}

    @property
    def bounds(self) -> CellRect:
        return CellRect(0, 0, self.width - 1, self.height - 1)

    def copy(self) -> CellGrid:
        g = CellGrid(self.width, self.height)
        g.cells = self.cells.copy()
        g.table = dict(self.table)
        return g

    def partitions(self) -> list[PartitionRef]:
        return [self.table[k] for k in sorted(self.table)]

    def machine_partitions(self, machine_id: int) -> list[PartitionRef]:
        return [p for p in self.partitions() if p.machine_id == machine_id]

    def clip(self, rect: CellRect) -> CellRect | None:
        return rect.intersection(self.bounds)

    def _place(self, ref: PartitionRef) -> None:
        b = ref.bounds
        self.table[ref.partition_id] = ref
        self.cells[b.top : b.bottom + 1, b.left : b.right + 1] = ref.partition_id

    # -- routing ---------------------------------------------------------

    def route_point(self, cell: CellCoord | tuple[int, int]) -> PartitionRef:
        x, y = cell
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise RoutingError(f"cell {(x, y)} outside {self.width}x{self.height} grid")
        return self.table[int(self.cells[y, x])]

    def query_overlap(self, q: CellRect) -> list[PartitionRef]:
        return self.query_overlap_probed(q).partitions

    def query_overlap_probed(self, q: CellRect) -> OverlapResult:
        """Partitions intersecting ``q`` plus the number of cells read.

        Each found partition pushes the cell right of its clipped top row and
        the cell below its clipped left column. A cell is read at most once, so
        the probe count never exceeds ``q.area``.
        """
        if not self.bounds.contains_rect(q) or not q.is_valid():
            raise ValueError(f"query {q} must be clipped to the grid first")
        cells = self.cells
        table = self.table
        stack = [(q.left, q.top)]
        seen_cells = set()
        found: dict[int, PartitionRef] = {}
        while stack:
            c = stack.pop()
            if c in seen_cells:
                continue
            seen_cells.add(c)
            x, y = c
            pid = int(cells[y, x])
            if pid in found:
                continue
            p = table[pid]
            found[pid] = p
            b = p.bounds
            top = b.top if b.top > q.top else q.top
            left = b.left if b.left > q.left else q.left
            if b.right + 1 <= q.right:
                stack.append((b.right + 1, top))
            if b.bottom + 1 <= q.bottom:
                stack.append((left, b.bottom + 1))
        return OverlapResult(list(found.values()), len(seen_cells))

    # -- plan updates ----------------------------------------------------

    def validate_update(self, u: PlanUpdate) -> None:
        if not u.removed:
            raise PlanUpdateError("update removes nothing")
        if len(set(u.removed)) != len(u.removed):
            raise PlanUpdateError("duplicate removed partition")
        for pid in u.removed:
            if pid not in self.table:
                raise PlanUpdateError(f"partition {pid} is not live")
        added_ids = [a.partition_id for a in u.added]
        if len(set(added_ids)) != len(added_ids):
            raise PlanUpdateError("duplicate added partition id")
        for a in u.added:
            if a.partition_id in self.table:
                raise PlanUpdateError(f"partition id {a.partition_id} already in use")
            if not a.bounds.is_valid() or not self.bounds.contains_rect(a.bounds):
                raise PlanUpdateError(f"partition {a.partition_id} bounds {a.bounds} invalid")
        target = np.isin(self.cells, np.asarray(u.removed, dtype=np.int64))
        cover = np.zeros_like(self.cells)
        for a in u.added:
            b = a.bounds
            cover[b.top : b.bottom + 1, b.left : b.right + 1] += 1
        if not np.array_equal(cover, target.astype(np.int64)):
            raise PlanUpdateError("added partitions do not exactly tile the removed ones")

    def plan_update_steps(self, u: PlanUpdate) -> Iterator[CellCoord]:
        """Apply ``u`` one cell at a time, yielding after every cell swap.

        New partitions are registered before any cell points at them and the
        old ones are dropped only after the last swap, so every intermediate
        cell reference resolves.
        """
        self.validate_update(u)
        for a in u.added:
            self.table[a.partition_id] = a
        for a in u.added:
            for c in a.bounds.cells():
                self.cells[c.y, c.x] = a.partition_id
                yield c
        for pid in u.removed:
            del self.table[pid]

    def apply_plan_update(self, u: PlanUpdate) -> CellGrid:
        for _ in self.plan_update_steps(u):
            pass
        return self

    # -- invariants ------------------------------------------------------

    def check_tiling(self) -> None:
        """Raise ``AssertionError`` unless cells and table tile the grid exactly."""
        ids = set(np.unique(self.cells).tolist())
        if 0 in ids:
            raise AssertionError("unassigned cell")
        if ids != set(self.table):
            raise AssertionError(f"cell references {ids ^ set(self.table)} not matched by table")
        for pid, p in self.table.items():
            b = p.bounds
            if p.partition_id != pid:
                raise AssertionError(f"table key {pid} holds partition {p.partition_id}")
            block = self.cells[b.top : b.bottom + 1, b.left : b.right + 1]
            if not np.all(block == pid):
                raise AssertionError(f"partition {pid} bounds not fully owned")
            if int(np.count_nonzero(self.cells == pid)) != b.area:
                raise AssertionError(f"partition {pid} owns cells outside its bounds")

    def check_cell_references(self) -> None:
        """Weaker invariant that also holds mid-update: every cell resolves to a
        partition whose bounds contain it."""
        for pid in np.unique(self.cells).tolist():
            p = self.table.get(pid)
            if p is None:
                raise AssertionError(f"cell references unknown partition {pid}")
            ys, xs = np.nonzero(self.cells == pid)
            b = p.bounds
            if xs.min() < b.left or xs.max() > b.right or ys.min() < b.top or ys.max() > b.bottom:
                raise AssertionError(f"partition {pid} referenced outside its bounds")

    # -- snapshots -------------------------------------------------------

    def to_snapshot(self) -> str:
        lines = []
        for p in self.partitions():
            b = p.bounds
            lines.append(
                f"partition {p.partition_id} {b.left} {b.top} {b.right} {b.bottom} {p.machine_id}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text: str, width: int | None = None, height: int | None = None) -> CellGrid:
        refs = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] != "partition" or len(parts) != 7:
                raise ValueError(f"line {lineno}: expected 'partition id left top right bottom machine'")
            pid, left, top, right, bottom, machine = map(int, parts[1:])
            refs.append(PartitionRef(pid, CellRect(left, top, right, bottom), machine))
        if not refs:
            raise ValueError("empty snapshot")
        w = width if width is not None else max(r.bounds.right for r in refs) + 1
        h = height if height is not None else max(r.bounds.bottom for r in refs) + 1
        grid = cls(w, h)
        for r in refs:
            grid._place(r)
        grid.check_tiling()
        return grid

    @classmethod
    def from_partitions(cls, width: int, height: int, refs: Iterable[PartitionRef]) -> CellGrid:
        grid = cls(width, height)
        for r in refs:
            grid._place(r)
        grid.check_tiling()
        return grid


def split_rect(rect: CellRect) -> tuple[CellRect, CellRect] | None:
    """Halve ``rect`` across its longer side; the left/top half takes the odd cell.

    Equal sides split the width. Returns ``None`` for a single cell.
    """
    w, h = rect.width, rect.height
    if w == 1 and h == 1:
        return None
    if w >= h:
        mid = rect.left + (w + 1) // 2 - 1
        return (
            CellRect(rect.left, rect.top, mid, rect.bottom),
            CellRect(mid + 1, rect.top, rect.right, rect.bottom),
        )
    mid = rect.top + (h + 1) // 2 - 1
    return (
        CellRect(rect.left, rect.top, rect.right, mid),
        CellRect(rect.left, mid + 1, rect.right, rect.bottom),
    )


def init_partitioning(num_executors: int, grid: tuple[int, int]) -> CellGrid:
    """Initial plan: split the largest partition in half until every executor
    has one. Surviving partitions get ids and machines 1..n in creation order."""
    width, height = grid
    if num_executors < 1:
        raise InvalidConfiguration("need at least one executor")
    result = CellGrid(width, height)
    # heap of (-area, creation_seq, rect); lowest creation id wins area ties
    heap = [(-result.bounds.area, 0, result.bounds)]
    seq = 1
    while len(heap) < num_executors:
        neg_area, cid, rect = heap[0]
        halves = split_rect(rect)
        if halves is None:
            break
        heapq.heappop(heap)
        for half in halves:
            heapq.heappush(heap, (-half.area, seq, half))
            seq += 1
    leaves = sorted(heap, key=lambda item: item[1])
    for i, (_, _, rect) in enumerate(leaves, 1):
        result._place(PartitionRef(i, rect, i))
    return result


@dataclass
class IdAllocator:
    """Monotone global partition-id source."""

    next_id: int = 1
    issued: list[int] = field(default_factory=list, repr=False)

    def take(self, n: int = 1) -> int:
        start = self.next_id
        self.next_id += n
        return start

    def observe(self, pid: int) -> None:
        if pid >= self.next_id:
            self.next_id = pid + 1
