"""Run reports and their CSV forms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

TRACE_COLUMNS = ["round", "time_s", "r_s", "stage", "decision", "m_H", "m_L", "outcome"]


@dataclass
class RunReport:
    strategy: str
    seed: int
    intervals: list[dict]
    trace: list[dict]
    summary: dict
    snapshots: dict[float, str] = field(default_factory=dict)
    snapshot_answers: list[tuple[int, int, int]] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [row[name] for row in self.intervals]

    def window_mean(self, name: str, start: float, end: float) -> float:
        """Mean of an interval column over intervals lying inside ``[start, end]`` seconds."""
        vals = [r[name] for r in self.intervals if r["interval_start_s"] >= start and r["interval_end_s"] <= end]
        if not vals:
            raise ValueError(f"no interval inside [{start}, {end}]")
        return sum(vals) / len(vals)


def build_report(sim) -> RunReport:
    machines = sorted(sim.executors)
    intervals = sim.metrics.rows(sim.duration_us, machines)
    ledger = sim.ledger
    hist = ledger.count_histogram()
    summary = {
        "strategy": sim.strategy.kind,
        "seed": sim.config.seed,
        "delivered": ledger.delivered,
        "processed_once": hist.get(1, 0),
        "unprocessed": hist.get(0, 0),
        "processed_more": sum(v for k, v in hist.items() if k > 1),
        "violations": len(ledger.violations),
        "matches": sum(ledger.matches),
        "continuous_queries": sum(1 for q in sim.queries if q.kind == "continuous"),
        "snapshot_queries": sum(1 for q in sim.queries if q.kind == "snapshot"),
        "snapshot_answers": len(sim.metrics.snapshot_answers),
        "plan_changes": sim.metrics.totals["plan_changes"],
        "plan_changes_subset": sim.metrics.totals["plan_changes_subset"],
        "plan_changes_split": sim.metrics.totals["plan_changes_split"],
        "plan_changes_merge": sim.metrics.totals["plan_changes_merge"],
        "plan_changes_manual": sim.metrics.totals["plan_changes_manual"],
        "rejected_updates": sim.metrics.totals["rejected_updates"],
        "chains_broken": sim.metrics.totals["chains_broken"],
        "dropped": sim.metrics.totals["dropped"],
        "forwarded": sum(ex.forwarded for ex in sim.executors.values()),
        "messages": sim.metrics.totals["messages"],
        "bytes": sim.metrics.totals["bytes"],
        "events": sim.loop.processed,
        "end_time_s": sim.loop.now / 1_000_000,
        "live_partitions": sum(len(ex.partitions) for ex in sim.executors.values()),
    }
    return RunReport(
        strategy=sim.strategy.kind,
        seed=sim.config.seed,
        intervals=intervals,
        trace=[dict(r) for r in sim.coordinator.trace],
        summary=summary,
        snapshots=dict(sim.snapshots),
        snapshot_answers=list(sim.metrics.snapshot_answers),
    )


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    buf = io.StringIO()
    if not rows and columns is None:
        return ""
    columns = columns or list(rows[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def write_run_outputs(report: RunReport, out_dir: str | Path, prefix: str = "") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / f"{prefix}run_report.csv"
    p.write_text(rows_to_csv(report.intervals))
    written.append(p)
    p = out / f"{prefix}decision_trace.csv"
    p.write_text(rows_to_csv(report.trace, TRACE_COLUMNS))
    written.append(p)
    p = out / f"{prefix}summary.csv"
    p.write_text(rows_to_csv([{"key": k, "value": v} for k, v in report.summary.items()], ["key", "value"]))
    written.append(p)
    for t, text in sorted(report.snapshots.items()):
        p = out / f"{prefix}plan_{t:g}s.txt"
        p.write_text(text)
        written.append(p)
    return written


def compare_rows(reports: dict[str, RunReport], baseline: str | None = None) -> list[dict]:
    """Join interval series by strategy; ratios are relative to ``baseline`` (the last strategy by default)."""
    names = list(reports)
    baseline = baseline or names[-1]
    n = min(len(r.intervals) for r in reports.values())
    rows = []
    for i in range(n):
        ref = reports[names[0]].intervals[i]
        row = {"interval_start_s": ref["interval_start_s"], "interval_end_s": ref["interval_end_s"]}
        base = reports[baseline].intervals[i]
        for name in names:
            r = reports[name].intervals[i]
            row[f"{name}_units_of_work"] = r["units_of_work"]
            row[f"{name}_mean_latency_ms"] = r["mean_latency_ms"]
            row[f"{name}_p95_latency_ms"] = r["p95_latency_ms"]
            row[f"{name}_processed"] = r["processed"]
        for name in names:
            if name == baseline:
                continue
            r = reports[name].intervals[i]
            row[f"{name}_vs_{baseline}_uow_ratio"] = r["units_of_work"] / base["units_of_work"] if base["units_of_work"] else 0.0
            row[f"{name}_vs_{baseline}_latency_ratio"] = (
                r["mean_latency_ms"] / base["mean_latency_ms"] if base["mean_latency_ms"] else 0.0
            )
        rows.append(row)
    return rows
