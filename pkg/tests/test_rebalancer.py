import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from swarmlb.cost import partition_cost_num
from swarmlb.geometry import CellRect
from swarmlb.global_index import CellGrid, PartitionRef
from swarmlb.rebalancer import (
    STAGE_MAX,
    STAGE_MIN,
    Decision,
    DecisionState,
    Infeasible,
    MoveSide,
    OwnedPartition,
    ReduceRequest,
    SplitMove,
    SubsetMove,
    c_diff_num,
    decide,
    find_split,
    find_subset,
    merge_adjacent,
    reduce_workload,
)
from swarmlb.stats import Axis, StatsMatrix, split_counts, stats_from_arrivals, totals

# -- decision automaton ----------------------------------------------------------


def run_decisions(r_values, beta=20):
    state = DecisionState(beta=beta)
    out = []
    for r in r_values:
        d, state = decide(state, r)
        out.append((d, state.stage))
    return out, state


def test_first_round_keeps_do_nothing_and_moves_right():
    (d, stage), = run_decisions([5])[0]
    assert d is Decision.DO_NOTHING and stage == 1


def test_two_drops_flip_to_rebalance():
    trace, state = run_decisions([0, 0])
    assert trace[0] == (Decision.DO_NOTHING, -1)
    assert trace[1] == (Decision.REBALANCE, 0)
    assert state.repeat_count == 1


def test_stage_saturates_on_the_right():
    trace, _ = run_decisions(range(1, 8))
    assert [s for _, s in trace] == [1, 2, 2, 2, 2, 2, 2]


def test_forced_flip_after_beta_identical_decisions():
    trace, _ = run_decisions(range(1, 30), beta=20)
    decisions = [d for d, _ in trace]
    assert decisions[:20] == [Decision.DO_NOTHING] * 20
    assert decisions[20] is Decision.REBALANCE
    # the flipped decision repeats until its own count reaches beta
    assert decisions[21:] == [Decision.REBALANCE] * 8


@settings(max_examples=200)
@given(st.lists(st.integers(0, 20), max_size=80), st.integers(1, 6))
def test_decide_is_pure_and_bounded(r_values, beta):
    a, _ = run_decisions(r_values, beta)
    b, _ = run_decisions(r_values, beta)
    assert a == b
    state = DecisionState(beta=beta)
    for r in r_values:
        prev = state
        d, state = decide(state, r)
        assert STAGE_MIN < state.stage <= STAGE_MAX
        flipped = d is not prev.prev_decision
        if flipped:
            assert state.stage == 0 and state.repeat_count == 1
        else:
            assert state.repeat_count == prev.repeat_count + 1
        assert state.pre_r_s == r


# -- subset move ---------------------------------------------------------------


def test_find_subset_hand_trace():
    parts = [(1, 6), (2, 5), (3, 4), (4, 1)]
    # C_max = (c_mH - c_mL) / 2 = 10
    assert find_subset(parts, 36, 16) == [1, 3]


def test_single_partition_never_fits():
    assert find_subset([(7, 30)], 30, 0) == []
    assert find_subset([(7, 30)], 30, 40) == []


def test_zero_cost_partitions_are_not_moved():
    assert find_subset([(1, 0), (2, 0), (3, 4)], 4, 0) == []


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.integers(0, 200), min_size=1, max_size=20), st.integers(0, 3000))
def test_greedy_subset_is_half_approximate(costs, c_ml):
    parts = list(enumerate(costs, 1))
    c_mh = sum(costs)
    taken = find_subset(parts, c_mh, c_ml)
    got = sum(costs[i - 1] for i in taken)
    assert len(taken) == len(set(taken))
    assert 2 * got <= max(0, c_mh - c_ml)
    opt = oracles.subset_sum_dp(costs, max(0, c_mh - c_ml) // 2)
    assert 2 * got >= opt


# -- split search ------------------------------------------------------------------


def uniform_stats(w, h, per_cell=1):
    ext = CellRect(0, 0, w - 1, h - 1)
    pts = [c for c in ((x, y) for y in range(h) for x in range(w)) for _ in range(per_cell)]
    qs = [CellRect(x, y, x, y) for y in range(h) for x in range(w)]
    return stats_from_arrivals(ext, pts, qs)


def test_symmetric_partition_splits_in_the_middle():
    s = uniform_stats(2, 8)
    c_p = partition_cost_num(totals(s))
    cand = find_split(s, c_p, 0, c_p, totals(s)[2])
    assert cand.axis is Axis.ROWS and cand.sp == 3
    assert cand.diff_num == 0


def test_one_by_k_runs_only_one_axis():
    s = uniform_stats(1, 9)
    c_p = partition_cost_num(totals(s))
    cand = find_split(s, c_p, 0, c_p, 9)
    assert cand.axis is Axis.ROWS and cand.searches == 2
    assert find_split(uniform_stats(1, 1), 1, 0, 1, 1) is None


def exhaustive_best(s, axis, side, c_mh, c_ml, c_p):
    n = len(s.axis(axis)) - 1
    vals = [c_diff_num(s, axis, sp, side, c_mh, c_ml, c_p) for sp in range(n)]
    return min(abs(v) for v in vals)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**6))
def test_binary_search_matches_exhaustive_scan(seed):
    rng = random.Random(seed)
    w, h = rng.randint(1, 12), rng.randint(2, 12)
    arr = oracles.random_arrivals(rng, CellRect(0, 0, w - 1, h - 1), 1, 60, 0)
    # single-cell queries make every count monotone in the cut position
    arr.query_rounds[0] = [CellRect(x, y, x, y) for x, y in arr.point_rounds[0] if rng.random() < 0.5]
    s = stats_from_arrivals(arr.extent, arr.points, arr.queries)
    c_p = partition_cost_num(totals(s))
    c_ml = rng.randint(0, c_p)
    c_mh = c_p + rng.randint(0, c_p)
    cand = find_split(s, c_mh, c_ml, c_p, max(1, totals(s)[2]))
    best = min(
        exhaustive_best(s, axis, side, c_mh, c_ml, c_p)
        for axis in Axis
        if len(s.axis(axis)) > 1
        for side in MoveSide
    )
    assert abs(cand.diff_num) == best
    # the reported difference is exactly the formula at the chosen cut
    n1, q1, r1, n2, q2, r2 = split_counts(s, cand.axis, cand.sp)
    moved, kept = (n1 * q1 * r1, n2 * q2 * r2) if cand.move_side is MoveSide.FIRST else (n2 * q2 * r2, n1 * q1 * r1)
    assert cand.diff_num == (c_mh - c_p + kept) - (c_ml + moved)


# -- workload reduction ----------------------------------------------------------


def owned(pid, rect, machine, stats):
    return OwnedPartition(PartitionRef(pid, rect, machine), stats)


def test_subset_is_tried_before_split():
    parts = [
        owned(1, CellRect(0, 0, 1, 1), 1, uniform_stats(2, 2, 3)),
        owned(2, CellRect(2, 0, 2, 0), 1, stats_from_arrivals(CellRect(2, 0, 2, 0), [(2, 0)], [CellRect(2, 0, 2, 0)])),
    ]
    out = reduce_workload(ReduceRequest(c_mL=0, r_s=20, fresh_pid=10, target_machine=2), parts)
    assert out == SubsetMove((2,))


def test_single_cell_partition_is_infeasible():
    ext = CellRect(11, 0, 11, 0)
    s = stats_from_arrivals(ext, [(11, 0)] * 5, [ext] * 2)
    out = reduce_workload(ReduceRequest(0, 7, 20, 2), [owned(13, ext, 4, s)])
    assert isinstance(out, Infeasible)


def machine_costs_after(outcome, parts, c_ml):
    c_mh = sum(p.cost for p in parts)
    moved = partition_cost_num(totals(outcome.moved_stats))
    kept = partition_cost_num(totals(outcome.kept_stats))
    parent = next(p.cost for p in parts if p.ref.partition_id == outcome.parent_id)
    return c_mh - parent + kept, c_ml + moved


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_split_improves_imbalance(seed):
    rng = random.Random(seed)
    w, h = rng.randint(2, 10), rng.randint(2, 10)
    ext = CellRect(0, 0, w - 1, h - 1)
    arr = oracles.random_arrivals(rng, ext, 1, 80, 20)
    s = stats_from_arrivals(ext, arr.points, arr.queries)
    parts = [owned(1, ext, 1, s)]
    c_ml = rng.randint(0, max(0, parts[0].cost // 4))
    out = reduce_workload(ReduceRequest(c_ml, max(1, totals(s)[2]), 50, 2), parts)
    if isinstance(out, SplitMove):
        new_h, new_l = machine_costs_after(out, parts, c_ml)
        assert abs(new_h - new_l) < abs(parts[0].cost - c_ml)
        assert new_h <= parts[0].cost
        assert out.moved_child.partition_id == 50 and out.kept_child.partition_id == 51
        assert out.moved_child.machine_id == 2 and out.kept_child.machine_id == 1
        g = CellGrid.from_partitions(w, h, [out.moved_child, out.kept_child])
        g.check_tiling()
    else:
        assert not isinstance(out, SubsetMove)


# -- merging -------------------------------------------------------------------


def counter(start):
    state = [start]

    def nxt():
        state[0] += 1
        return state[0] - 1

    return nxt


def stats_for(rect, pts):
    return stats_from_arrivals(rect, [p for p in pts if rect.contains(*p)], [])


def test_split_halves_merge_back():
    pts = [(0, 0), (3, 1), (2, 1), (1, 1)]
    a, b = CellRect(0, 0, 1, 1), CellRect(2, 0, 3, 1)
    plans = merge_adjacent([owned(4, a, 1, stats_for(a, pts)), owned(5, b, 1, stats_for(b, pts))], counter(9))
    assert len(plans) == 1
    assert plans[0].sources == (4, 5)
    assert plans[0].merged == PartitionRef(9, CellRect(0, 0, 3, 1), 1)
    assert totals(plans[0].stats)[0] == 4


def test_l_shape_does_not_merge():
    rects = [CellRect(0, 0, 1, 0), CellRect(0, 1, 0, 1), CellRect(1, 1, 2, 2)]
    parts = [owned(i + 1, r, 1, StatsMatrix(r)) for i, r in enumerate(rects)]
    assert merge_adjacent(parts, counter(10)) == []


def test_other_machine_blocks_merge():
    a, b = CellRect(0, 0, 0, 0), CellRect(1, 0, 1, 0)
    assert merge_adjacent([owned(1, a, 1, StatsMatrix(a)), owned(2, b, 2, StatsMatrix(b))], counter(3)) == []


def test_merge_runs_to_fixpoint():
    rects = [CellRect(x, 0, x, 0) for x in range(4)]
    plans = merge_adjacent([owned(i + 1, r, 1, StatsMatrix(r)) for i, r in enumerate(rects)], counter(10))
    assert plans[-1].merged.bounds == CellRect(0, 0, 3, 0)
    assert len(plans) == 3


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_random_merges_keep_coverage_and_points(seed):
    rng = random.Random(seed)
    w, h = rng.randint(1, 8), rng.randint(1, 8)
    plan = oracles.random_plan(rng, w, h, rng.randint(1, 10), machines=2)
    pts = [(rng.randrange(w), rng.randrange(h)) for _ in range(40)]
    for m in (1, 2):
        mine = [owned(p, r, m, stats_for(r, pts)) for p, r, mm in plan if mm == m]
        if not mine:
            continue
        plans = merge_adjacent(mine, counter(100))
        live = {o.ref.partition_id: (o.ref.bounds, totals(o.stats)[0]) for o in mine}
        for mp in plans:
            a, b = mp.sources
            ra, na = live.pop(a)
            rb, nb = live.pop(b)
            assert mp.merged.bounds.area == ra.area + rb.area
            assert totals(mp.stats)[0] == na + nb
            live[mp.merged.partition_id] = (mp.merged.bounds, na + nb)
        assert sum(r.area for r, _ in live.values()) == sum(o.ref.bounds.area for o in mine)
        assert sum(n for _, n in live.values()) == sum(1 for p in pts if any(o.ref.bounds.contains(*p) for o in mine))
