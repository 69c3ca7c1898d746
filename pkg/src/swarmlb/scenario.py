"""Scenario files: INI text describing a workload and simulator settings.

Sections::

    [workload]      duration, base_rate, grid (WxH), base_distribution,
                    trace_path, trace_loop, query_count, query_spread,
                    query_side_frac, snapshot_rate, snapshot_side_frac
    [sim]           any SimConfig field (latency as "lo, hi" seconds)
    [hotspot.NAME]  center ("x, y"), side_frac, spatial, temporal,
                    redirect_frac, start, end, query_count, query_burst
    [mixture.NAME]  center, sigma, weight

Hotspots and mixture components keep file order.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .sim.config import SimConfig
from .workload import GaussianComponent, HotspotSpec, WorkloadSpec


@dataclass
class Scenario:
    name: str
    workload: WorkloadSpec
    sim: dict = field(default_factory=dict)  # SimConfig overrides

    def sim_config(self, **overrides) -> SimConfig:
        values = dict(self.sim)
        values.update({k: v for k, v in overrides.items() if v is not None})
        values.setdefault("grid", tuple(self.workload.grid))
        cfg = SimConfig(**values)
        cfg.validate()
        return cfg


def parse_grid(text: str) -> tuple[int, int]:
    parts = text.lower().replace(" ", "").split("x")
    if len(parts) != 2:
        raise ValueError(f"grid must look like 64x64, got {text!r}")
    w, h = int(parts[0]), int(parts[1])
    if w < 1 or h < 1:
        raise ValueError(f"grid must be at least 1x1, got {text!r}")
    return w, h


def _pair(text: str) -> tuple[float, float]:
    a, b = (float(v) for v in text.split(","))
    return a, b


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_or_inf(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity", "none") else float(text)


_WORKLOAD_FIELDS = {
    "duration": float,
    "base_rate": float,
    "grid": parse_grid,
    "base_distribution": str,
    "trace_path": str,
    "trace_loop": _bool,
    "query_count": int,
    "query_spread": float,
    "query_side_frac": float,
    "snapshot_rate": float,
    "snapshot_side_frac": float,
}

_HOTSPOT_FIELDS = {
    "center": _pair,
    "side_frac": float,
    "spatial": str,
    "temporal": str,
    "redirect_frac": float,
    "start": float,
    "end": float,
    "query_count": int,
    "query_burst": float,
}


def _sim_parser(name: str):
    types = {f.name: f.type for f in dataclasses.fields(SimConfig)}
    if name not in types:
        raise ValueError(f"unknown [sim] key {name!r}")
    if name == "grid":
        return parse_grid
    if name == "latency":
        return _pair
    if name == "window":
        return _float_or_inf
    if name == "fade":
        return _bool
    if name == "snapshot_times":
        return lambda t: tuple(float(v) for v in t.split(",") if v.strip())
    if name == "activation_delay":
        return float
    t = types[name]
    return int if t in (int, "int") else float


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    wl = WorkloadSpec()
    sim: dict = {}
    hotspots, mixture = [], []
    for section in cp.sections():
        items = dict(cp.items(section))
        try:
            if section == "workload":
                for k, v in items.items():
                    if k not in _WORKLOAD_FIELDS:
                        raise ValueError(f"unknown [workload] key {k!r}")
                    setattr(wl, k, _WORKLOAD_FIELDS[k](v))
            elif section == "sim":
                for k, v in items.items():
                    sim[k] = _sim_parser(k)(v)
            elif section.startswith("hotspot."):
                h = HotspotSpec()
                for k, v in items.items():
                    if k not in _HOTSPOT_FIELDS:
                        raise ValueError(f"unknown hotspot key {k!r}")
                    setattr(h, k, _HOTSPOT_FIELDS[k](v))
                hotspots.append(h)
            elif section.startswith("mixture."):
                mixture.append(
                    GaussianComponent(_pair(items["center"]), float(items["sigma"]), float(items.get("weight", 1.0)))
                )
            else:
                raise ValueError(f"unknown section [{section}]")
        except (KeyError, ValueError) as exc:
            raise ValueError(f"[{section}]: {exc}") from exc
    wl.hotspots = hotspots
    wl.mixture = mixture
    wl.validate()
    if "grid" in sim and tuple(sim["grid"]) != tuple(wl.grid):
        raise ValueError("[sim] grid differs from [workload] grid")
    return Scenario(name, wl, sim)


def scenario_to_text(s: Scenario) -> str:
    wl = s.workload
    lines = ["[workload]"]
    for k in _WORKLOAD_FIELDS:
        v = getattr(wl, k)
        if v is None:
            continue
        if k == "grid":
            v = f"{v[0]}x{v[1]}"
        lines.append(f"{k} = {v}")
    if s.sim:
        lines += ["", "[sim]"]
        for k, v in s.sim.items():
            if isinstance(v, tuple):
                v = ", ".join(str(x) for x in v) if k != "grid" else f"{v[0]}x{v[1]}"
            lines.append(f"{k} = {v}")
    for i, h in enumerate(wl.hotspots, 1):
        lines += ["", f"[hotspot.h{i}]"]
        for k in _HOTSPOT_FIELDS:
            v = getattr(h, k)
            if k == "center":
                v = f"{v[0]}, {v[1]}"
            lines.append(f"{k} = {v}")
    for i, c in enumerate(wl.mixture, 1):
        lines += ["", f"[mixture.c{i}]", f"center = {c.center[0]}, {c.center[1]}", f"sigma = {c.sigma}", f"weight = {c.weight}"]
    return "\n".join(lines) + "\n"


# -- built-in scenarios -------------------------------------------------------

# Desk-scale defaults shared by the built-ins: one 64x64 space, 8 executors,
# queries of 5% side so that hotspot queries overlap many cells.
_BASE = dict(duration=1200.0, base_rate=500.0, grid=(64, 64), query_count=400, query_spread=60.0, query_side_frac=0.05)
_SIM = dict(executors=8, routers=2, window=600.0, service_cost=40e-6, queue_threshold=50)
_LOWER_LEFT = (0.2, 0.8)  # y grows downwards
_UPPER_RIGHT = (0.8, 0.2)


def _hotspot(center, **kw) -> HotspotSpec:
    d = dict(center=center, side_frac=0.15, spatial="uniform", temporal="normal", redirect_frac=0.4,
             start=300.0, end=1020.0, query_count=400)
    d.update(kw)
    return HotspotSpec(**d)


def _builtin(name: str) -> Scenario:
    if name == "uniform":
        return Scenario(name, WorkloadSpec(**_BASE), dict(_SIM))
    if name == "uniform_hotspot":
        return Scenario(name, WorkloadSpec(**_BASE, hotspots=[_hotspot(_LOWER_LEFT)]), dict(_SIM))
    if name == "normal_hotspot":
        return Scenario(name, WorkloadSpec(**_BASE, hotspots=[_hotspot(_LOWER_LEFT, spatial="normal")]), dict(_SIM))
    if name == "step_hotspot":
        return Scenario(name, WorkloadSpec(**_BASE, hotspots=[_hotspot(_LOWER_LEFT, temporal="step")]), dict(_SIM))
    if name == "two_overlapping":
        hs = [
            _hotspot(_LOWER_LEFT, redirect_frac=0.2, start=240.0, end=900.0, query_count=200),
            _hotspot(_UPPER_RIGHT, redirect_frac=0.2, start=420.0, end=1080.0, query_count=200),
        ]
        return Scenario(name, WorkloadSpec(**_BASE, hotspots=hs), dict(_SIM))
    if name == "two_consecutive":
        hs = [
            _hotspot(_LOWER_LEFT, redirect_frac=0.2, start=180.0, end=660.0, query_count=200),
            _hotspot(_UPPER_RIGHT, redirect_frac=0.2, start=660.0, end=1140.0, query_count=200),
        ]
        return Scenario(name, WorkloadSpec(**_BASE, hotspots=hs), dict(_SIM))
    if name == "alternating":
        # short step hotspots hopping between corners; drives frequent plan changes
        corners = [(0.15, 0.15), (0.85, 0.85), (0.85, 0.15), (0.15, 0.85)]
        hs = []
        t = 60.0
        i = 0
        while t < 1740.0:
            hs.append(_hotspot(corners[i % 4], temporal="step", side_frac=0.2, start=t, end=t + 120.0,
                               redirect_frac=0.5, query_count=60, query_burst=20.0))
            t += 120.0
            i += 1
        wl = dict(_BASE, duration=1800.0, base_rate=300.0, query_count=200)
        return Scenario(name, WorkloadSpec(**wl, hotspots=hs), dict(_SIM, round_period=10.0, window=300.0))
    raise KeyError(name)


BUILTIN_SCENARIOS = (
    "uniform",
    "uniform_hotspot",
    "normal_hotspot",
    "step_hotspot",
    "two_overlapping",
    "two_consecutive",
    "alternating",
)


def load_scenario(name_or_path: str) -> Scenario:
    """A built-in scenario by name, or an INI scenario file."""
    if name_or_path in BUILTIN_SCENARIOS:
        return _builtin(name_or_path)
    p = Path(name_or_path)
    if not p.is_file():
        raise FileNotFoundError(
            f"no scenario file {name_or_path!r} (built-ins: {', '.join(BUILTIN_SCENARIOS)})"
        )
    return parse_scenario(p.read_text(), p.stem)
