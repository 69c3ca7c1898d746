import random

import pytest
from scipy import stats as sps

from swarmlb.geometry import CellRect
from swarmlb.workload import (
    US,
    GaussianComponent,
    HotspotSpec,
    PointEvent,
    QueryEvent,
    Workload,
    WorkloadSpec,
    dump_trace,
    generate,
    load_trace,
    query_rect,
    to_cell,
)


def test_to_cell_clamps_far_edge():
    assert to_cell(0.0, 0.0, (10, 4)) == (0, 0)
    assert to_cell(1.0, 1.0, (10, 4)) == (9, 3)
    assert to_cell(0.55, 0.26, (10, 4)) == (5, 1)


def test_query_rect_is_at_least_one_cell():
    assert query_rect(0.5, 0.5, 0.0016, (64, 64)) == CellRect(32, 32, 32, 32)
    r = query_rect(0.99, 0.0, 0.25, (16, 16))
    assert (r.width, r.height) == (4, 4) and r.right == 15 and r.top == 0


def test_uniform_base_passes_chi_square():
    spec = WorkloadSpec(duration=40.0, base_rate=500.0, grid=(8, 8))
    counts = [0] * 64
    for p in Workload(spec, 3).point_stream():
        counts[p.y * 8 + p.x] += 1
    assert sum(counts) > 15000
    assert sps.chisquare(counts).pvalue > 0.01


def test_generate_is_deterministic_and_ordered():
    spec = WorkloadSpec(duration=20.0, base_rate=50.0, query_count=10, query_spread=5.0, snapshot_rate=0.5)
    a, b = generate(spec, 1), generate(spec, 1)
    assert a == b
    assert generate(spec, 2) != a
    times = [e.time for e in a]
    assert times == sorted(times)
    assert all(0 <= e.time < 20 * US for e in a)
    ids = [e.query_id for e in a if isinstance(e, QueryEvent)]
    assert ids == list(range(1, len(ids) + 1))
    assert {e.kind for e in a if isinstance(e, QueryEvent)} == {"continuous", "snapshot"}


def region_cells(h, grid):
    x0, y0, x1, y1 = h.region
    a = to_cell(x0, y0, grid)
    b = to_cell(x1, y1, grid)
    return CellRect(a[0], a[1], b[0], b[1])


def test_step_hotspot_jumps_within_one_interval():
    h = HotspotSpec(center=(0.5, 0.5), side_frac=0.2, temporal="step", redirect_frac=0.4, start=60.0, end=120.0)
    spec = WorkloadSpec(duration=120.0, base_rate=400.0, grid=(50, 50), hotspots=[h])
    reg = region_cells(h, spec.grid)
    before = after = 0
    for p in Workload(spec, 5).point_stream():
        if reg.contains(p.x, p.y):
            if p.time < 60 * US:
                before += 1
            else:
                after += 1
    area_share = reg.area / 2500
    expect_before = 400 * 60 * area_share
    expect_after = 400 * 60 * (0.4 + 0.6 * area_share)
    assert abs(before - expect_before) < 5 * expect_before**0.5
    assert abs(after - expect_after) < 5 * expect_after**0.5


def test_normal_profile_peaks_mid_way():
    h = HotspotSpec(start=100.0, end=400.0, redirect_frac=0.4)
    assert h.intensity(99.9) == 0.0 and h.intensity(400.0) == 0.0
    assert h.intensity(250.0) == pytest.approx(0.4)
    assert h.intensity(150.0) < h.intensity(200.0) < h.intensity(250.0)
    assert h.intensity(150.0) == pytest.approx(h.intensity(350.0))


def test_consecutive_hotspots_hand_over_directly():
    h1 = HotspotSpec(center=(0.2, 0.2), temporal="step", start=10.0, end=30.0)
    h2 = HotspotSpec(center=(0.8, 0.8), temporal="step", start=30.0, end=50.0)
    w = Workload(WorkloadSpec(duration=60.0, hotspots=[h1, h2]), 0)
    assert w.redirect_fractions(29.999) == [0.4, 0.0]
    assert w.redirect_fractions(30.0) == [0.0, 0.4]


def test_overlapping_redirects_are_normalised():
    hs = [HotspotSpec(temporal="step", redirect_frac=0.8, start=0.0, end=10.0) for _ in range(2)]
    w = Workload(WorkloadSpec(duration=10.0, hotspots=hs), 0)
    assert w.redirect_fractions(1.0) == [0.5, 0.5]


def test_hotspot_queries_arrive_in_the_burst_inside_region():
    h = HotspotSpec(center=(0.3, 0.3), start=100.0, end=300.0, query_count=50, query_burst=60.0)
    spec = WorkloadSpec(duration=300.0, grid=(100, 100), query_side_frac=0.01, hotspots=[h])
    qs = Workload(spec, 4).query_schedule()
    assert len(qs) == 50
    reg = region_cells(h, spec.grid)
    for q in qs:
        assert 100 * US <= q.time < 160 * US
        assert reg.contains(q.rect.left, q.rect.top)


def test_normal_spatial_profile_stays_in_region_and_concentrates():
    h = HotspotSpec(center=(0.5, 0.5), side_frac=0.4, spatial="normal", temporal="step", redirect_frac=1.0,
                    start=0.0, end=10.0)
    w = Workload(WorkloadSpec(duration=10.0, hotspots=[h]), 0)
    rng = random.Random(0)
    pts = [w.sample_unit(1 * US, rng) for _ in range(2000)]
    assert all(0.3 <= u <= 0.7 and 0.3 <= v <= 0.7 for u, v in pts)
    # sigma = 0.08, truncated at the region edge (2.5 sigma); expected share within one sigma per axis
    inner = sum(1 for u, v in pts if abs(u - 0.5) < 0.08 and abs(v - 0.5) < 0.08)
    share = ((sps.norm.cdf(1) - sps.norm.cdf(-1)) / (sps.norm.cdf(2.5) - sps.norm.cdf(-2.5))) ** 2
    sd = (share * (1 - share) * len(pts)) ** 0.5
    assert abs(inner - share * len(pts)) < 4 * sd


def test_gaussian_mixture_favours_components():
    spec = WorkloadSpec(duration=20.0, base_rate=200.0, grid=(10, 10), base_distribution="gaussian_mixture",
                        mixture=[GaussianComponent((0.25, 0.25), 0.05, 3.0), GaussianComponent((0.75, 0.75), 0.05, 1.0)])
    pts = list(Workload(spec, 1).point_stream())
    a = sum(1 for p in pts if p.x < 5 and p.y < 5)
    b = sum(1 for p in pts if p.x >= 5 and p.y >= 5)
    assert a > 2 * b > 0


@pytest.mark.parametrize(
    "spec",
    [
        WorkloadSpec(duration=0.0),
        WorkloadSpec(base_rate=-1.0),
        WorkloadSpec(query_side_frac=0.0),
        WorkloadSpec(base_distribution="zipf"),
        WorkloadSpec(base_distribution="gaussian_mixture"),
        WorkloadSpec(hotspots=[HotspotSpec(center=(0.01, 0.5))]),
        WorkloadSpec(hotspots=[HotspotSpec(start=5.0, end=5.0)]),
    ],
)
def test_invalid_specs(spec):
    with pytest.raises(ValueError):
        spec.validate()


# -- traces ------------------------------------------------------------------


def test_trace_round_trip(tmp_path):
    pts = [PointEvent(0, 1, 2), PointEvent(1_500_000, 3, 0), PointEvent(2_000_001, 0, 0)]
    path = tmp_path / "t.txt"
    dump_trace(pts, path)
    assert load_trace(path, loop=False) == pts


def test_trace_sorted_and_rebased(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("12.0 1 1\n10.0 2 2\n\n11.5 3 3\n")
    got = load_trace(path, (4, 4), loop=False)
    assert [(p.time, p.x) for p in got] == [(0, 2), (1_500_000, 3), (2_000_000, 1)]


def test_trace_loops_to_cover_duration(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("0 0 0\n1 1 1\n2 2 2\n")
    got = load_trace(path, (4, 4), duration=7.0, loop=True)
    # span 2 s, mean gap 1 s: passes start every 3 s
    assert [p.time // US for p in got] == [0, 1, 2, 3, 4, 5, 6]
    w = Workload(WorkloadSpec(duration=7.0, grid=(4, 4), base_distribution="trace", trace_path=str(path)), 0)
    assert len(list(w.point_stream())) == 7


def test_lonlat_trace(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("0 -180 90\n1 0.0 0.0\n2 179.9 -89.9\n")
    got = load_trace(path, (4, 2), loop=False)
    assert [(p.x, p.y) for p in got] == [(0, 0), (2, 1), (3, 1)]


@pytest.mark.parametrize("body,line", [("0 1 1\n1 2\n", 2), ("0 1 1\n\n1 a 2\n", 3), ("nan 1 1\n", 1)])
def test_malformed_trace_reports_line(tmp_path, body, line):
    path = tmp_path / "bad.txt"
    path.write_text(body)
    with pytest.raises(ValueError, match=f"bad.txt:{line}:"):
        load_trace(path, (4, 4))
