import csv

import pytest

from swarmlb.cli import main
from swarmlb.scenario import BUILTIN_SCENARIOS, load_scenario, parse_scenario, scenario_to_text

SMALL = ["--scenario", "uniform_hotspot", "--duration", "40", "--grid", "16x16", "--executors", "4"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(tmp_path, capsys):
    assert main(["run", *SMALL, "--out", str(tmp_path), "--snapshot-at", "20"]) == 0
    rows = read_csv(tmp_path / "run_report.csv")
    assert rows and "units_of_work" in rows[0] and "cost_m4" in rows[0]
    trace = read_csv(tmp_path / "decision_trace.csv")
    assert list(trace[0]) == ["round", "time_s", "r_s", "stage", "decision", "m_H", "m_L", "outcome"]
    summary = {r["key"]: r["value"] for r in read_csv(tmp_path / "summary.csv")}
    assert summary["violations"] == "0"
    assert (tmp_path / "plan_20s.txt").read_text().startswith("partition")
    assert "wrote" in capsys.readouterr().out


def test_compare_writes_ratios(tmp_path):
    assert main(["compare", *SMALL, "--out", str(tmp_path), "--strategies", "swarm,static_uniform"]) == 0
    rows = read_csv(tmp_path / "compare.csv")
    assert rows and "swarm_vs_static_uniform_uow_ratio" in rows[0]
    assert "static_uniform_mean_latency_ms" in rows[0]
    assert (tmp_path / "swarm_run_report.csv").exists()
    assert (tmp_path / "static_uniform_run_report.csv").exists()


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SWARMLB_OUT", str(tmp_path / "env"))
    assert main(["run", *SMALL, "--strategy", "static_uniform"]) == 0
    assert (tmp_path / "env" / "run_report.csv").exists()


def test_invalid_strategy_is_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", *SMALL, "--strategy", "magic"])
    assert exc.value.code == 2
    assert main(["compare", *SMALL, "--strategies", "swarm,magic"]) == 2
    assert "magic" in capsys.readouterr().err


def test_unknown_scenario_exits_with_error(capsys):
    assert main(["run", "--scenario", "nope"]) == 2
    assert "built-ins" in capsys.readouterr().err


def test_stats_bytes(capsys):
    assert main(["stats-bytes", "--executors", "40", "--grid", "1000x1000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "decentralized,40,1000000,640"
    assert lines[2] == "centralized,40,1000000,40000000"


def test_plan_and_scenarios(capsys):
    assert main(["plan", "--executors", "5", "--grid", "16x16"]) == 0
    out = capsys.readouterr().out
    assert out.count("partition") == 5
    assert main(["scenarios"]) == 0
    assert capsys.readouterr().out.split() == list(BUILTIN_SCENARIOS)


@pytest.mark.parametrize("name", BUILTIN_SCENARIOS)
def test_scenario_text_round_trip(name):
    sc = load_scenario(name)
    back = parse_scenario(scenario_to_text(sc), name)
    assert back.workload == sc.workload
    assert back.sim == sc.sim


def test_scenario_file_errors(tmp_path):
    with pytest.raises(ValueError, match="unknown"):
        parse_scenario("[workload]\nspeed = 3\n")
    with pytest.raises(ValueError, match="grid"):
        parse_scenario("[workload]\ngrid = 8\n")
    p = tmp_path / "mine.ini"
    p.write_text("[workload]\nduration = 10\ngrid = 8x8\n\n[sim]\nexecutors = 2\n\n[hotspot.a]\ncenter = 0.5, 0.5\nstart = 1\nend = 5\n")
    sc = load_scenario(str(p))
    assert sc.name == "mine" and sc.sim_config().executors == 2
    assert sc.workload.hotspots[0].end == 5.0
