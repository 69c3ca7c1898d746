"""Seeded synthetic workloads: a base point distribution, hotspots that
redirect a share of the sources, and continuous/snapshot query streams.

All spatial values are produced in the unit square and mapped to grid cells
by floor scaling. Times are integer microseconds.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Union

from .geometry import CellRect

US = 1_000_000


@dataclass
class HotspotSpec:
    center: tuple[float, float] = (0.5, 0.5)
    side_frac: float = 0.15
    spatial: str = "uniform"  # uniform | normal
    temporal: str = "normal"  # normal | step
    redirect_frac: float = 0.4
    start: float = 0.0  # seconds
    end: float = 0.0
    query_count: int = 0
    query_burst: float = 60.0  # queries are instantiated over this many seconds from start

    def validate(self) -> None:
        if self.spatial not in ("uniform", "normal"):
            raise ValueError(f"unknown hotspot spatial profile {self.spatial!r}")
        if self.temporal not in ("normal", "step"):
            raise ValueError(f"unknown hotspot temporal profile {self.temporal!r}")
        if not 0.0 <= self.redirect_frac <= 1.0:
            raise ValueError("redirect_frac must lie in [0, 1]")
        if not 0.0 < self.side_frac <= 1.0:
            raise ValueError("side_frac must lie in (0, 1]")
        half = self.side_frac / 2
        cx, cy = self.center
        if cx - half < -1e-12 or cx + half > 1 + 1e-12 or cy - half < -1e-12 or cy + half > 1 + 1e-12:
            raise ValueError(f"hotspot region around {self.center} leaves the unit square")
        if self.end <= self.start:
            raise ValueError("hotspot must end after it starts")
        if self.query_count < 0 or self.query_burst <= 0:
            raise ValueError("bad hotspot query burst")

    @property
    def region(self) -> tuple[float, float, float, float]:
        half = self.side_frac / 2
        cx, cy = self.center
        return cx - half, cy - half, cx + half, cy + half

    def intensity(self, t: float) -> float:
        """Fraction of sources redirected here at time ``t`` (seconds).

        The normal profile is evaluated on whole seconds and peaks mid-way
        with sigma = duration / 6.
        """
        if not self.start <= t < self.end:
            return 0.0
        if self.temporal == "step":
            return self.redirect_frac
        sec = math.floor(t)
        mid = (self.start + self.end) / 2
        sigma = (self.end - self.start) / 6
        return self.redirect_frac * math.exp(-0.5 * ((sec - mid) / sigma) ** 2)


@dataclass
class GaussianComponent:
    center: tuple[float, float]
    sigma: float
    weight: float = 1.0


@dataclass
class WorkloadSpec:
    duration: float = 600.0  # seconds
    base_rate: float = 1000.0  # points per second
    grid: tuple[int, int] = (64, 64)
    base_distribution: str = "uniform"  # uniform | gaussian_mixture | trace
    mixture: list[GaussianComponent] = field(default_factory=list)
    trace_path: str | None = None
    trace_loop: bool = True
    query_count: int = 0  # continuous queries of the base workload
    query_spread: float = 60.0  # seconds over which base queries arrive
    query_side_frac: float = 0.0016
    snapshot_rate: float = 0.0  # snapshot queries per second
    snapshot_side_frac: float | None = None
    hotspots: list[HotspotSpec] = field(default_factory=list)

    def validate(self) -> None:
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.base_rate < 0 or self.snapshot_rate < 0:
            raise ValueError("rates must be non-negative")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ValueError("grid must be at least 1x1")
        if not 0.0 < self.query_side_frac <= 1.0:
            raise ValueError("query_side_frac must lie in (0, 1]")
        if self.snapshot_side_frac is not None and not 0.0 < self.snapshot_side_frac <= 1.0:
            raise ValueError("snapshot_side_frac must lie in (0, 1]")
        if self.query_count < 0 or self.query_spread <= 0:
            raise ValueError("bad base query settings")
        if self.base_distribution not in ("uniform", "gaussian_mixture", "trace"):
            raise ValueError(f"unknown base distribution {self.base_distribution!r}")
        if self.base_distribution == "gaussian_mixture" and not self.mixture:
            raise ValueError("gaussian_mixture needs at least one component")
        if self.base_distribution == "trace" and not self.trace_path:
            raise ValueError("trace distribution needs trace_path")
        for h in self.hotspots:
            h.validate()


@dataclass(frozen=True)
class PointEvent:
    time: int
    x: int
    y: int


@dataclass(frozen=True)
class QueryEvent:
    time: int
    query_id: int
    rect: CellRect
    kind: str = "continuous"  # continuous | snapshot


StreamEvent = Union[PointEvent, QueryEvent]


def to_cell(u: float, v: float, grid: tuple[int, int]) -> tuple[int, int]:
    """Unit square to cell; values at or past the far edge clamp to the last cell."""
    w, h = grid
    x = min(max(int(math.floor(u * w)), 0), w - 1)
    y = min(max(int(math.floor(v * h)), 0), h - 1)
    return x, y


def query_rect(u: float, v: float, side_frac: float, grid: tuple[int, int]) -> CellRect:
    """Square query of side ``side_frac`` (at least one cell) centred on a focal point."""
    w, h = grid
    qw = max(1, round(side_frac * w))
    qh = max(1, round(side_frac * h))
    cx, cy = to_cell(u, v, grid)
    left = min(max(cx - (qw - 1) // 2, 0), w - qw)
    top = min(max(cy - (qh - 1) // 2, 0), h - qh)
    return CellRect(left, top, left + qw - 1, top + qh - 1)


class Workload:
    """Samples the active point distribution and builds the query schedule."""

    def __init__(self, spec: WorkloadSpec, seed: int):
        spec.validate()
        self.spec = spec
        self.seed = seed
        self._trace: list[PointEvent] | None = None
        if spec.base_distribution == "trace":
            self._trace = load_trace(spec.trace_path, spec.grid, duration=spec.duration, loop=spec.trace_loop)
        weights = [c.weight for c in spec.mixture]
        self._mix_total = sum(weights)

    # -- spatial sampling ------------------------------------------------

    def _base_unit(self, rng: random.Random) -> tuple[float, float]:
        if self.spec.base_distribution == "gaussian_mixture":
            pick = rng.random() * self._mix_total
            comp = self.spec.mixture[-1]
            for c in self.spec.mixture:
                if pick < c.weight:
                    comp = c
                    break
                pick -= c.weight
            return (
                min(max(rng.gauss(comp.center[0], comp.sigma), 0.0), 1.0),
                min(max(rng.gauss(comp.center[1], comp.sigma), 0.0), 1.0),
            )
        return rng.random(), rng.random()

    @staticmethod
    def _hotspot_unit(h: HotspotSpec, rng: random.Random) -> tuple[float, float]:
        x0, y0, x1, y1 = h.region
        if h.spatial == "normal":
            sigma = 0.2 * h.side_frac
            while True:
                u = rng.gauss(h.center[0], sigma)
                v = rng.gauss(h.center[1], sigma)
                if x0 <= u <= x1 and y0 <= v <= y1:
                    return u, v
        return x0 + rng.random() * (x1 - x0), y0 + rng.random() * (y1 - y0)

    def redirect_fractions(self, t: float) -> list[float]:
        """Per-hotspot redirected share at ``t`` seconds; scaled down if the sum exceeds 1."""
        fr = [h.intensity(t) for h in self.spec.hotspots]
        total = sum(fr)
        if total > 1.0:
            fr = [f / total for f in fr]
        return fr

    def sample_unit(self, t_us: int, rng: random.Random) -> tuple[float, float]:
        t = t_us / US
        if self.spec.hotspots:
            pick = rng.random()
            for h, f in zip(self.spec.hotspots, self.redirect_fractions(t)):
                if pick < f:
                    return self._hotspot_unit(h, rng)
                pick -= f
        return self._base_unit(rng)

    def sample_point(self, t_us: int, rng: random.Random) -> tuple[int, int]:
        """Cell of a point emitted by a random source at ``t_us``."""
        u, v = self.sample_unit(t_us, rng)
        return to_cell(u, v, self.spec.grid)

    # -- queries ---------------------------------------------------------

    def query_schedule(self) -> list[QueryEvent]:
        """All queries of the run in time order (ids from 1, assigned in that order)."""
        spec = self.spec
        rng = random.Random(f"{self.seed}:queries")
        raw: list[tuple[int, int, CellRect, str]] = []
        order = 0
        # base continuous queries: focal points follow the active distribution
        for _ in range(spec.query_count):
            t = int(rng.random() * spec.query_spread * US)
            u, v = self.sample_unit(t, rng)
            raw.append((t, order, query_rect(u, v, spec.query_side_frac, spec.grid), "continuous"))
            order += 1
        for h in spec.hotspots:
            for _ in range(h.query_count):
                t = int((h.start + rng.random() * h.query_burst) * US)
                u, v = self._hotspot_unit(h, rng)
                raw.append((t, order, query_rect(u, v, spec.query_side_frac, spec.grid), "continuous"))
                order += 1
        if spec.snapshot_rate > 0:
            side = spec.snapshot_side_frac or spec.query_side_frac
            t = 0.0
            while True:
                t += rng.expovariate(spec.snapshot_rate)
                if t >= spec.duration:
                    break
                t_us = int(t * US)
                u, v = self.sample_unit(t_us, rng)
                raw.append((t_us, order, query_rect(u, v, side, spec.grid), "snapshot"))
                order += 1
        raw.sort(key=lambda r: (r[0], r[1]))
        return [QueryEvent(t, i, rect, kind) for i, (t, _, rect, kind) in enumerate(raw, 1)]

    # -- points at a fixed rate -----------------------------------------

    def point_stream(self, rate: float | None = None) -> Iterator[PointEvent]:
        """Points with exponential gaps at ``rate`` (default base_rate), or the loaded trace."""
        if self._trace is not None:
            yield from self._trace
            return
        rate = self.spec.base_rate if rate is None else rate
        if rate <= 0:
            return
        rng = random.Random(f"{self.seed}:points")
        end = int(self.spec.duration * US)
        t = 0.0
        while True:
            t += rng.expovariate(rate) * US
            t_us = int(t)
            if t_us >= end:
                return
            x, y = self.sample_point(t_us, rng)
            yield PointEvent(t_us, x, y)


def generate(spec: WorkloadSpec, seed: int) -> list[StreamEvent]:
    """The full open-loop stream (points at base_rate plus all queries) in time order."""
    w = Workload(spec, seed)
    events: list[StreamEvent] = list(w.point_stream())
    events.extend(w.query_schedule())
    # points before queries at equal times; stable otherwise
    events.sort(key=lambda e: (e.time, isinstance(e, QueryEvent)))
    return events


# -- traces ---------------------------------------------------------------


def _lonlat_to_cell(lon: float, lat: float, grid: tuple[int, int]) -> tuple[int, int]:
    return to_cell((lon + 180.0) / 360.0, (90.0 - lat) / 180.0, grid)


def load_trace(
    path: str | Path,
    grid: tuple[int, int] | None = None,
    duration: float | None = None,
    loop: bool = True,
    fmt: str = "auto",
) -> list[PointEvent]:
    """Read ``time x y`` records (seconds; cells or lon/lat) in timestamp order.

    ``fmt`` is ``cells``, ``lonlat`` or ``auto`` (integers mean cells, unless a
    ``# format`` header says otherwise). With ``loop`` and a ``duration``
    longer than the trace, passes are replayed back to back, each offset by
    the span plus the mean gap, and cut at ``duration``.
    """
    records: list[tuple[int, float, float]] = []
    integral = True
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "format" and fmt == "auto":
                fmt = parts[1]
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'time x y', got {line!r}")
        try:
            t = float(parts[0])
            a = float(parts[1])
            b = float(parts[2])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric field in {line!r}") from exc
        if not (math.isfinite(t) and math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"{path}:{lineno}: non-finite value")
        integral = integral and a.is_integer() and b.is_integer()
        records.append((round(t * US), a, b))
    if not records:
        return []
    if fmt == "auto":
        fmt = "cells" if integral else "lonlat"
    if fmt not in ("cells", "lonlat"):
        raise ValueError(f"unknown trace format {fmt!r}")
    records.sort(key=lambda r: r[0])
    base = records[0][0]
    points = []
    for t, a, b in records:
        if fmt == "cells":
            x, y = int(a), int(b)
            if grid is not None:
                x = min(max(x, 0), grid[0] - 1)
                y = min(max(y, 0), grid[1] - 1)
        else:
            if grid is None:
                raise ValueError("lon/lat traces need a grid")
            x, y = _lonlat_to_cell(a, b, grid)
        points.append(PointEvent(t - base, x, y))
    if not loop or duration is None:
        return points
    span = points[-1].time
    end = int(duration * US)
    if span <= 0 or len(points) < 2:
        return points
    period = span + span // (len(points) - 1)
    passes = max(1, math.ceil(end / span))
    looped = (PointEvent(p.time + k * period, p.x, p.y) for k in range(passes) for p in points)
    return [p for p in looped if p.time < end]


def dump_trace(points: Iterable[PointEvent], path: str | Path) -> None:
    lines = ["# format cells", "# time cell_x cell_y"]
    for p in points:
        lines.append(f"{p.time // US}.{p.time % US:06d} {p.x} {p.y}")
    Path(path).write_text("\n".join(lines) + "\n")
