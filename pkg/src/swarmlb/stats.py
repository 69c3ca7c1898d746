"""Marginal row/column statistics kept by each partition.

Every axis is one ``8 x len`` int64 block: five maintained statistics followed
by the three per-round collectors. Arrivals only touch collectors; the
cumulative arrays are rebuilt once per round by :func:`finalize_round`.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable

import numpy as np

from .geometry import CellRect

N, Q, R, SPAN_Q, PRE_SPAN_Q, N_NEW, Q_NEW, SPAN_Q_NEW = range(8)
FIELD_NAMES = ("N", "Q", "R", "spanQ", "preSpanQ'", "N'", "Q'", "spanQ'")


class Axis(str, Enum):
    ROWS = "rows"
    COLS = "cols"

    @property
    def other(self) -> Axis:
        return Axis.COLS if self is Axis.ROWS else Axis.ROWS


class AxisStats:
    __slots__ = ("data",)

    def __init__(self, length: int, data: np.ndarray | None = None):
        self.data = np.zeros((8, length), dtype=np.int64) if data is None else data

    def __len__(self) -> int:
        return self.data.shape[1]

    def copy(self) -> AxisStats:
        return AxisStats(len(self), self.data.copy())

    def __getitem__(self, field: int) -> np.ndarray:
        return self.data[field]


class StatsMatrix:
    __slots__ = ("extent", "rows", "cols")

    def __init__(self, extent: CellRect):
        self.extent = extent
        self.rows = AxisStats(extent.height)
        self.cols = AxisStats(extent.width)

    def axis(self, axis: Axis) -> AxisStats:
        return self.rows if axis is Axis.ROWS else self.cols

    def copy(self) -> StatsMatrix:
        s = StatsMatrix.__new__(StatsMatrix)
        s.extent = self.extent
        s.rows = self.rows.copy()
        s.cols = self.cols.copy()
        return s

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StatsMatrix):
            return NotImplemented
        return (
            self.extent == other.extent
            and np.array_equal(self.rows.data, other.rows.data)
            and np.array_equal(self.cols.data, other.cols.data)
        )

    def dump(self) -> str:
        """One line per axis index: ``<axis> <i> N Q R spanQ preSpanQ' N' Q' spanQ'``."""
        lines = [f"# extent {' '.join(map(str, self.extent))}", "# axis i " + " ".join(FIELD_NAMES)]
        for name, ax in (("rows", self.rows), ("cols", self.cols)):
            for i in range(len(ax)):
                lines.append(f"{name} {i} " + " ".join(str(int(v)) for v in ax.data[:, i]))
        return "\n".join(lines) + "\n"


def record_point(s: StatsMatrix, x: int, y: int) -> None:
    e = s.extent
    if not e.contains(x, y):
        raise ValueError(f"point {(x, y)} outside partition extent {e}")
    s.rows.data[N_NEW, y - e.top] += 1
    s.cols.data[N_NEW, x - e.left] += 1


def record_query(s: StatsMatrix, q_clipped: CellRect) -> None:
    e = s.extent
    if not q_clipped.is_valid() or not e.contains_rect(q_clipped):
        raise ValueError(f"query {q_clipped} is not clipped to extent {e}")
    r0 = q_clipped.top - e.top
    r1 = q_clipped.bottom - e.top
    c0 = q_clipped.left - e.left
    c1 = q_clipped.right - e.left
    rows, cols = s.rows.data, s.cols.data
    rows[Q_NEW, r0] += 1
    cols[Q_NEW, c0] += 1
    if r1 > r0:
        rows[SPAN_Q_NEW, r0 + 1 : r1 + 1] += 1
    if c1 > c0:
        cols[SPAN_Q_NEW, c0 + 1 : c1 + 1] += 1


def _finalize_axis(d: np.ndarray, fade: bool) -> None:
    sum_n = np.cumsum(d[N_NEW])
    sum_q = np.cumsum(d[Q_NEW])
    if fade:
        d[N] //= 2
    d[N] += sum_n
    d[Q] += sum_q
    d[R] = sum_n + sum_q
    d[PRE_SPAN_Q] = d[SPAN_Q_NEW]
    d[SPAN_Q] += d[SPAN_Q_NEW]
    d[N_NEW:] = 0


def finalize_round(s: StatsMatrix, fade: bool = False) -> None:
    """Fold this round's collectors into the cumulative statistics.

    Only ``N`` fades (integer halving before the round's arrivals are added).
    """
    _finalize_axis(s.rows.data, fade)
    _finalize_axis(s.cols.data, fade)


def totals(s: StatsMatrix) -> tuple[int, int, int]:
    d = s.rows.data
    return int(d[N, -1]), int(d[Q, -1]), int(d[R, -1])


def split_counts(s: StatsMatrix, axis: Axis, sp: int) -> tuple[int, int, int, int, int, int]:
    """``(N1, Q1, R1, N2, Q2, R2)`` for cutting after index ``sp``.

    Part 1 is the top/left side. Queries crossing the cut count on both sides.
    """
    d = s.axis(axis).data
    length = d.shape[1]
    if not 0 <= sp < length - 1:
        raise ValueError(f"split index {sp} out of range for axis of length {length}")
    n, q, r = int(d[N, -1]), int(d[Q, -1]), int(d[R, -1])
    n1, q1, r1 = int(d[N, sp]), int(d[Q, sp]), int(d[R, sp])
    return (
        n1,
        q1,
        r1,
        n - n1,
        q - q1 + int(d[SPAN_Q, sp + 1]),
        r - r1 + int(d[PRE_SPAN_Q, sp + 1]),
    )


def _prefix_tail(d: np.ndarray, sp: int) -> np.ndarray:
    """Axis block for indices ``sp+1..`` rebuilt as if that side stood alone."""
    out = np.zeros((8, d.shape[1] - sp - 1), dtype=np.int64)
    out[N] = d[N, sp + 1 :] - d[N, sp]
    out[Q] = d[Q, sp + 1 :] - d[Q, sp] + d[SPAN_Q, sp + 1]
    out[R] = d[R, sp + 1 :] - d[R, sp] + d[PRE_SPAN_Q, sp + 1]
    out[SPAN_Q] = d[SPAN_Q, sp + 1 :]
    out[PRE_SPAN_Q] = d[PRE_SPAN_Q, sp + 1 :]
    out[SPAN_Q, 0] = 0
    out[PRE_SPAN_Q, 0] = 0
    return out


def _allocate_cumulative(parent: np.ndarray, child_total: int) -> np.ndarray:
    """Scale a cumulative array to ``child_total`` by flooring each increment;
    the leftover goes to the last index."""
    parent_total = int(parent[-1]) if len(parent) else 0
    if parent_total <= 0 or child_total <= 0:
        return np.zeros_like(parent)
    inc = np.diff(parent, prepend=0)
    share = (inc * child_total) // parent_total
    share[-1] += child_total - int(share.sum())
    return np.cumsum(share)


def _allocate_plain(parent: np.ndarray, num: int, den: int) -> np.ndarray:
    if den <= 0 or num <= 0:
        return np.zeros_like(parent)
    return (parent * num) // den


def _perpendicular(parent: np.ndarray, n: int, q: int, r: int) -> np.ndarray:
    out = np.zeros_like(parent)
    out[N] = _allocate_cumulative(parent[N], n)
    out[Q] = _allocate_cumulative(parent[Q], q)
    out[R] = _allocate_cumulative(parent[R], r)
    out[SPAN_Q] = _allocate_plain(parent[SPAN_Q], q, int(parent[Q, -1]))
    out[PRE_SPAN_Q] = _allocate_plain(parent[PRE_SPAN_Q], r, int(parent[R, -1]))
    return out


def split_extent(extent: CellRect, axis: Axis, sp: int) -> tuple[CellRect, CellRect]:
    if axis is Axis.ROWS:
        cut = extent.top + sp
        return (
            CellRect(extent.left, extent.top, extent.right, cut),
            CellRect(extent.left, cut + 1, extent.right, extent.bottom),
        )
    cut = extent.left + sp
    return (
        CellRect(extent.left, extent.top, cut, extent.bottom),
        CellRect(cut + 1, extent.top, extent.right, extent.bottom),
    )


def derive_child_stats(s: StatsMatrix, axis: Axis, sp: int) -> tuple[StatsMatrix, StatsMatrix]:
    """Statistics for the two halves of a split.

    The split axis is exact (prefix subtraction). The other axis cannot be
    recovered from marginals, so it is the parent's profile scaled to each
    child's totals. Collectors start at zero.
    """
    n1, q1, r1, n2, q2, r2 = split_counts(s, axis, sp)
    e1, e2 = split_extent(s.extent, axis, sp)
    c1, c2 = StatsMatrix(e1), StatsMatrix(e2)
    d = s.axis(axis).data
    c1.axis(axis).data[:5] = d[:5, : sp + 1]
    c2.axis(axis).data[:] = _prefix_tail(d, sp)
    perp = s.axis(axis.other).data
    c1.axis(axis.other).data[:] = _perpendicular(perp, n1, q1, r1)
    c2.axis(axis.other).data[:] = _perpendicular(perp, n2, q2, r2)
    return c1, c2


def merge_stats(a: StatsMatrix, b: StatsMatrix) -> StatsMatrix:
    """Combine two abutting matrices whose union is a rectangle.

    Along the shared direction the cumulative arrays are concatenated (the
    second offset by the first's totals); across it they are summed. Queries
    that straddled the seam stay counted twice.
    """
    union = a.extent.union_if_rect(b.extent)
    if union is None:
        raise ValueError(f"{a.extent} and {b.extent} do not form a rectangle")
    first, second = (a, b) if (a.extent.left, a.extent.top) < (b.extent.left, b.extent.top) else (b, a)
    m = StatsMatrix(union)
    along = Axis.COLS if first.extent.top == second.extent.top and first.extent.bottom == second.extent.bottom else Axis.ROWS
    fa, sa = first.axis(along).data, second.axis(along).data
    joined = np.concatenate([fa, sa], axis=1)
    for f in (N, Q, R):
        joined[f, fa.shape[1] :] += fa[f, -1]
    m.axis(along).data[:] = joined
    m.axis(along.other).data[:] = first.axis(along.other).data + second.axis(along.other).data
    return m


def stats_from_arrivals(
    extent: CellRect,
    points: Iterable[tuple[int, int]],
    queries: Iterable[CellRect],
    fade: bool = False,
) -> StatsMatrix:
    """Record a batch of arrivals (queries clipped to ``extent``) and finalize once."""
    s = StatsMatrix(extent)
    for x, y in points:
        record_point(s, x, y)
    for q in queries:
        clipped = q.intersection(extent)
        if clipped is not None:
            record_query(s, clipped)
    finalize_round(s, fade)
    return s
