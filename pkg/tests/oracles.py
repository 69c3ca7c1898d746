"""Independent brute-force references used by the test-suite.

Nothing here imports the code under test except plain geometry types.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from swarmlb.geometry import CellRect


@dataclass
class Arrivals:
    """Raw arrivals on one partition, grouped by round (last round = last list)."""

    extent: CellRect
    point_rounds: list[list[tuple[int, int]]] = field(default_factory=list)
    query_rounds: list[list[CellRect]] = field(default_factory=list)

    @property
    def points(self):
        return [p for r in self.point_rounds for p in r]

    @property
    def queries(self):
        return [q for r in self.query_rounds for q in r]


def _row_of(extent, axis, x, y):
    return y - extent.top if axis == "rows" else x - extent.left


def _span(extent, axis, q):
    if axis == "rows":
        return q.top - extent.top, q.bottom - extent.top
    return q.left - extent.left, q.right - extent.left


def recount(arr: Arrivals, axis: str, sp: int):
    """True (n1, q1, r1, n2, q2, r2) for a cut after index ``sp``; queries are
    counted once per side they overlap."""
    e = arr.extent
    pts = arr.points
    qs = arr.queries
    last_pts = arr.point_rounds[-1] if arr.point_rounds else []
    last_qs = arr.query_rounds[-1] if arr.query_rounds else []
    n1 = sum(1 for x, y in pts if _row_of(e, axis, x, y) <= sp)
    n2 = len(pts) - n1
    q1 = sum(1 for q in qs if _span(e, axis, q)[0] <= sp)
    q2 = sum(1 for q in qs if _span(e, axis, q)[1] > sp)
    r1 = sum(1 for x, y in last_pts if _row_of(e, axis, x, y) <= sp) + sum(
        1 for q in last_qs if _span(e, axis, q)[0] <= sp
    )
    r2 = sum(1 for x, y in last_pts if _row_of(e, axis, x, y) > sp) + sum(
        1 for q in last_qs if _span(e, axis, q)[1] > sp
    )
    return n1, q1, r1, n2, q2, r2


def recount_totals(arr: Arrivals):
    return (
        len(arr.points),
        len(arr.queries),
        len(arr.point_rounds[-1] if arr.point_rounds else []) + len(arr.query_rounds[-1] if arr.query_rounds else []),
    )


def random_rect_in(rng: random.Random, extent: CellRect, max_side: int | None = None) -> CellRect:
    w = extent.width if max_side is None else min(extent.width, max_side)
    h = extent.height if max_side is None else min(extent.height, max_side)
    qw = rng.randint(1, w)
    qh = rng.randint(1, h)
    left = rng.randint(extent.left, extent.right - qw + 1)
    top = rng.randint(extent.top, extent.bottom - qh + 1)
    return CellRect(left, top, left + qw - 1, top + qh - 1)


def random_arrivals(rng: random.Random, extent: CellRect, rounds: int, max_points: int, max_queries: int) -> Arrivals:
    arr = Arrivals(extent)
    for _ in range(rounds):
        arr.point_rounds.append(
            [
                (rng.randint(extent.left, extent.right), rng.randint(extent.top, extent.bottom))
                for _ in range(rng.randint(0, max_points))
            ]
        )
        arr.query_rounds.append([random_rect_in(rng, extent) for _ in range(rng.randint(0, max_queries))])
    return arr


def naive_overlap(cells, q: CellRect) -> set[int]:
    """Visit every cell of ``q`` and collect partition ids."""
    return {int(cells[y][x]) for y in range(q.top, q.bottom + 1) for x in range(q.left, q.right + 1)}


def linear_scan_route(partitions, x, y):
    hits = [p for p in partitions if p.bounds.left <= x <= p.bounds.right and p.bounds.top <= y <= p.bounds.bottom]
    assert len(hits) == 1
    return hits[0]


def recursive_split_oracle(n: int, width: int, height: int) -> list[tuple[int, int, int, int]]:
    """Replay 'split the largest rectangle across its longer side' with plain lists.

    Rectangles are (left, top, right, bottom); ties on area go to the rectangle
    created first; equal sides halve the width; the first half gets the odd cell.
    """
    rects = [(0, (0, 0, width - 1, height - 1))]  # (creation order, rect)
    order = 1
    while len(rects) < n:
        def area(item):
            l, t, r, b = item[1]
            return (r - l + 1) * (b - t + 1)

        biggest = max(rects, key=lambda item: (area(item), -item[0]))
        l, t, r, b = biggest[1]
        w, h = r - l + 1, b - t + 1
        if w == 1 and h == 1:
            break
        rects.remove(biggest)
        if w >= h:
            cut = l + (w + 1) // 2 - 1
            halves = [(l, t, cut, b), (cut + 1, t, r, b)]
        else:
            cut = t + (h + 1) // 2 - 1
            halves = [(l, t, r, cut), (l, cut + 1, r, b)]
        for half in halves:
            rects.append((order, half))
            order += 1
    return [rect for _, rect in sorted(rects)]


def subset_sum_dp(costs: list[int], capacity: int) -> int:
    """Exact best subset total not exceeding ``capacity`` (set of reachable sums)."""
    reachable = {0}
    for c in costs:
        reachable |= {s + c for s in reachable if s + c <= capacity}
    return max(reachable)


def subset_sum_exact(costs: list[int], capacity: int) -> int:
    """Exact best subset total not exceeding ``capacity`` by meet-in-the-middle
    (fine for up to ~24 items with large costs)."""
    import numpy as np

    def all_sums(items):
        sums = np.zeros(1, dtype=np.int64)
        for c in items:
            sums = np.concatenate([sums, sums + c])
        return sums

    half = len(costs) // 2
    left = all_sums(costs[:half])
    right = np.sort(all_sums(costs[half:]))
    left = left[left <= capacity]
    idx = np.searchsorted(right, capacity - left, side="right") - 1
    return int((left + right[idx]).max())


# -- random plans and plan updates --------------------------------------------


def random_cut(rng: random.Random, rect: CellRect):
    """Two rectangles from one random straight cut, or ``None`` for a single cell."""
    options = []
    if rect.width > 1:
        options.append("v")
    if rect.height > 1:
        options.append("h")
    if not options:
        return None
    if rng.choice(options) == "v":
        c = rng.randint(rect.left, rect.right - 1)
        return CellRect(rect.left, rect.top, c, rect.bottom), CellRect(c + 1, rect.top, rect.right, rect.bottom)
    c = rng.randint(rect.top, rect.bottom - 1)
    return CellRect(rect.left, rect.top, rect.right, c), CellRect(rect.left, c + 1, rect.right, rect.bottom)


def random_plan(rng: random.Random, width: int, height: int, n_parts: int, machines: int = 4):
    """List of (pid, rect, machine) tiling the grid, built by random cuts."""
    rects = [CellRect(0, 0, width - 1, height - 1)]
    for _ in range(n_parts - 1):
        splittable = [r for r in rects if r.area > 1]
        if not splittable:
            break
        r = rng.choice(splittable)
        rects.remove(r)
        rects.extend(random_cut(rng, r))
    return [(i + 1, r, rng.randint(1, machines)) for i, r in enumerate(rects)]


def paint(width: int, height: int, parts) -> list[list[int]]:
    cells = [[0] * width for _ in range(height)]
    for pid, r, _ in parts:
        for y in range(r.top, r.bottom + 1):
            for x in range(r.left, r.right + 1):
                cells[y][x] = pid
    return cells


def random_valid_update(rng: random.Random, live: dict, next_id: int, machines: int = 4):
    """A random split, merge or move over ``live`` ({pid: (rect, machine)}).

    Returns (removed, added) with added as (pid, rect, machine) triples.
    """
    kinds = ["split", "move", "merge", "multi"]
    rng.shuffle(kinds)
    for kind in kinds:
        if kind == "split":
            cands = [p for p, (r, _) in live.items() if r.area > 1]
            if not cands:
                continue
            pid = rng.choice(sorted(cands))
            a, b = random_cut(rng, live[pid][0])
            return [pid], [(next_id, a, rng.randint(1, machines)), (next_id + 1, b, live[pid][1])]
        if kind == "multi":
            cands = [p for p, (r, _) in live.items() if r.area > 2]
            if not cands:
                continue
            pid = rng.choice(sorted(cands))
            pieces = [live[pid][0]]
            for _ in range(rng.randint(2, 4)):
                big = [r for r in pieces if r.area > 1]
                if not big:
                    break
                r = rng.choice(big)
                pieces.remove(r)
                pieces.extend(random_cut(rng, r))
            return [pid], [(next_id + i, r, rng.randint(1, machines)) for i, r in enumerate(pieces)]
        if kind == "move":
            pid = rng.choice(sorted(live))
            return [pid], [(next_id, live[pid][0], rng.randint(1, machines))]
        if kind == "merge":
            ids = sorted(live)
            pairs = []
            for i, a in enumerate(ids):
                for b in ids[i + 1 :]:
                    u = live[a][0].union_if_rect(live[b][0])
                    if u is not None:
                        pairs.append((a, b, u))
            if not pairs:
                continue
            a, b, u = rng.choice(pairs)
            return [a, b], [(next_id, u, live[a][1])]
    raise AssertionError("no update possible")


def corrupt_update(rng: random.Random, live: dict, removed, added, next_id: int):
    """Turn a valid update into one that must be rejected."""
    choice = rng.randrange(6)
    if choice == 0 and len(added) > 1:  # gap: drop one piece
        return removed, added[:-1], "gap"
    if choice == 1:  # overlap: grow the first piece by one cell where possible
        pid, r, m = added[0]
        bigger = CellRect(r.left, r.top, r.right, r.bottom + 1)
        return removed, [(pid, bigger, m)] + added[1:], "overlap"
    if choice == 2:  # removed partition is not live
        return removed + [next_id + 1000], added, "dead"
    if choice == 3:  # reuse an id that is already live
        live_id = sorted(live)[0]
        if live_id not in removed:
            pid, r, m = added[0]
            return removed, [(live_id, r, m)] + added[1:], "id in use"
    if choice == 4:
        return [], added, "empty"
    pid, r, m = added[0]
    return removed, [(pid, CellRect(r.left - 1000, r.top, r.right, r.bottom), m)] + added[1:], "out of grid"
