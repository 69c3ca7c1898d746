"""Cell-space primitives shared by the index, statistics and simulator."""

from __future__ import annotations

from typing import Iterator, NamedTuple


class CellCoord(NamedTuple):
    """A grid cell: ``x`` is the column, ``y`` the row (rows grow downward)."""

    x: int
    y: int


class CellRect(NamedTuple):
    """Axis-aligned rectangle of cells with inclusive borders."""

    left: int
    top: int
    right: int
    bottom: int

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def is_valid(self) -> bool:
        return self.left <= self.right and self.top <= self.bottom

    def contains(self, x: int, y: int) -> bool:
        return self.left <= x <= self.right and self.top <= y <= self.bottom

    def contains_rect(self, other: CellRect) -> bool:
        return (
            self.left <= other.left
            and other.right <= self.right
            and self.top <= other.top
            and other.bottom <= self.bottom
        )

    def intersects(self, other: CellRect) -> bool:
        return not (
            other.right < self.left
            or self.right < other.left
            or other.bottom < self.top
            or self.bottom < other.top
        )

    def intersection(self, other: CellRect) -> CellRect | None:
        r = CellRect(
            max(self.left, other.left),
            max(self.top, other.top),
            min(self.right, other.right),
            min(self.bottom, other.bottom),
        )
        return r if r.is_valid() else None

    def cells(self) -> Iterator[CellCoord]:
        """Row-major iteration, top-left first."""
        for y in range(self.top, self.bottom + 1):
            for x in range(self.left, self.right + 1):
                yield CellCoord(x, y)

    def union_if_rect(self, other: CellRect) -> CellRect | None:
        """Return the union when the two rectangles abut along a full edge."""
        if self.top == other.top and self.bottom == other.bottom:
            if self.right + 1 == other.left:
                return CellRect(self.left, self.top, other.right, self.bottom)
            if other.right + 1 == self.left:
                return CellRect(other.left, self.top, self.right, self.bottom)
        if self.left == other.left and self.right == other.right:
            if self.bottom + 1 == other.top:
                return CellRect(self.left, self.top, self.right, other.bottom)
            if other.bottom + 1 == self.top:
                return CellRect(self.left, other.top, self.right, self.bottom)
        return None
