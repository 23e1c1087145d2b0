"""End-to-end CLI tests driven in process through cli.main(argv)."""
import csv
import json

import pytest

from splitsim import cli


def quick_scenario() -> dict:
    """A scenario small enough that a full run takes well under a second."""
    return {
        "schema_version": 1,
        "model": {
            "name": "cli-tiny",
            "k_max": 2,
            "blocks": [
                {"work_gflop": 0.4, "param_mb": 5.0, "activation_mb": 0.2},
                {"work_gflop": 0.8, "param_mb": 8.0, "activation_mb": 0.1},
            ],
        },
        "nodes": [
            {"id": "dev", "kind": "device", "speed_gflops": 20.0, "mem_gb": 1.0,
             "trusted": True, "bg_util": 0.0},
            {"id": "edge", "kind": "edge", "speed_gflops": 80.0, "mem_gb": 4.0,
             "trusted": True, "bg_util": 0.05},
        ],
        "links": [
            {"a": "dev", "b": "edge", "bandwidth_mbps": 200.0, "latency_ms": 2.0},
        ],
        "workload": {
            "kind": "poisson",
            "rate_rps": 2.0,
            "duration_s": 5.0,
            "sla_budget_ms": 500.0,
        },
    }


@pytest.fixture()
def scenario_file(tmp_path):
    path = tmp_path / "quick.json"
    path.write_text(json.dumps(quick_scenario()))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- validate ----------------------------------------------------------------


def test_validate_ok(scenario_file, capsys):
    assert cli.main(["validate", str(scenario_file)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_invalid_document(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    raw = quick_scenario()
    raw["workload"]["kind"] = "burst"
    bad.write_text(json.dumps(raw))
    assert cli.main(["validate", str(bad)]) == 2
    assert "invalid" in capsys.readouterr().out


def test_validate_negative_bandwidth_names_the_link(tmp_path, capsys):
    raw = quick_scenario()
    raw["links"][0]["bandwidth_mbps"] = -5
    bad = tmp_path / "negbw.json"
    bad.write_text(json.dumps(raw))
    assert cli.main(["validate", str(bad)]) == 2
    out = capsys.readouterr().out
    assert "dev" in out and "edge" in out and "bandwidth" in out


def test_validate_io_errors(tmp_path, capsys):
    assert cli.main(["validate", str(tmp_path / "nope.json")]) == 3
    mangled = tmp_path / "mangled.json"
    mangled.write_text("{")
    assert cli.main(["validate", str(mangled)]) == 3
    capsys.readouterr()


# -- run -----------------------------------------------------------------------


def test_run_writes_artifacts(scenario_file, tmp_path, capsys):
    out = tmp_path / "artifacts"
    assert cli.main(["run", str(scenario_file), "--out", str(out)]) == 0
    rows = read_csv(out / "metrics.csv")
    assert len(rows) == 2
    assert rows[1][0] == "adaptive-seed0"
    payload = json.loads((out / "report.json").read_text())
    assert payload["schema_version"] == 1
    assert len(payload["reports"]) == 1
    cdf = read_csv(out / "cdf.csv")
    assert cdf[0] == ["latency_ms", "cum_fraction"]
    assert float(cdf[-1][1]) == 1.0
    assert not (out / "events.jsonl").exists()
    summary = capsys.readouterr().out
    assert "adaptive-seed0" in summary and "p95_ms" in summary


def test_run_event_log_flag(scenario_file, tmp_path):
    out = tmp_path / "ev"
    code = cli.main(
        ["run", str(scenario_file), "--out", str(out), "--event-log"]
    )
    assert code == 0
    lines = (out / "events.jsonl").read_text().splitlines()
    assert lines
    for line in lines:
        rec = json.loads(line)
        assert set(rec) == {"time", "kind", "request_id", "node_id", "detail"}
    kinds = {json.loads(line)["kind"] for line in lines}
    assert "arrival" in kinds and "monitor_tick" in kinds


def test_run_respects_overrides(scenario_file, tmp_path):
    out = tmp_path / "ovr"
    code = cli.main(
        [
            "run", str(scenario_file),
            "--set", "orchestrator.mode=static",
            "--set", "sim.seed=5",
            "--out", str(out),
        ]
    )
    assert code == 0
    rows = read_csv(out / "metrics.csv")
    assert rows[1][0] == "static-seed5"
    assert rows[1][1] == "static"
    assert rows[1][2] == "5"


def test_run_exit_codes(scenario_file, tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "ghost.json")]) == 3

    code = cli.main(
        ["run", str(scenario_file), "--set", "workload.rate_rps=-1",
         "--out", str(tmp_path / "x")]
    )
    assert code == 2

    raw = quick_scenario()
    for node in raw["nodes"]:
        node["mem_gb"] = 0.001  # smaller than any partition's parameters
    tight = tmp_path / "tight.json"
    tight.write_text(json.dumps(raw))
    code = cli.main(["run", str(tight), "--out", str(tmp_path / "y")])
    assert code == 4
    assert "infeasible" in capsys.readouterr().out


def test_run_uses_env_out_dir(scenario_file, tmp_path, monkeypatch):
    target = tmp_path / "from-env"
    monkeypatch.setenv("SPLITSIM_OUT", str(target))
    assert cli.main(["run", str(scenario_file)]) == 0
    assert (target / "metrics.csv").exists()


def test_run_is_deterministic(scenario_file, tmp_path):
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert cli.main(["run", str(scenario_file), "--out", str(first)]) == 0
    assert cli.main(["run", str(scenario_file), "--out", str(second)]) == 0
    assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()
    assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()


# -- compare ---------------------------------------------------------------------


def test_compare_artifacts(scenario_file, tmp_path):
    out = tmp_path / "cmp"
    code = cli.main(
        ["compare", str(scenario_file), "--seeds", "2", "--out", str(out)]
    )
    assert code == 0
    rows = read_csv(out / "compare.csv")
    assert [r[0] for r in rows[1:]] == [
        "adaptive-seed0", "adaptive-seed1", "static-seed0", "static-seed1",
    ]
    delta = read_csv(out / "delta.csv")
    assert delta[0] == [
        "seed", "delta_p95_ms", "delta_sla_hit_rate", "delta_throughput_rps",
        "delta_max_util", "delta_downtime_per_h",
    ]
    assert [r[0] for r in delta[1:]] == ["0", "1"]
    assert (out / "cdf_adaptive.csv").exists()
    assert (out / "cdf_static.csv").exists()


def test_compare_rejects_zero_seeds(scenario_file, tmp_path):
    code = cli.main(
        ["compare", str(scenario_file), "--seeds", "0",
         "--out", str(tmp_path / "z")]
    )
    assert code == 2


# -- sweep ----------------------------------------------------------------------


def test_sweep_writes_one_row_per_value(scenario_file, tmp_path):
    out = tmp_path / "sweep"
    code = cli.main(
        [
            "sweep", str(scenario_file),
            "--param", "workload.rate_rps",
            "--values", "1,3",
            "--seeds", "1",
            "--out", str(out),
        ]
    )
    assert code == 0
    rows = read_csv(out / "sweep.csv")
    assert len(rows[0]) == 11
    assert rows[0][:2] == ["param", "value"]
    assert [r[1] for r in rows[1:]] == ["1", "3"]
    assert all(r[0] == "workload.rate_rps" for r in rows[1:])


def test_sweep_rejects_empty_values(scenario_file, tmp_path):
    code = cli.main(
        ["sweep", str(scenario_file), "--param", "workload.rate_rps",
         "--values", " ,", "--out", str(tmp_path / "s")]
    )
    assert code == 2


def test_sweep_invalid_value_exits_invalid(scenario_file, tmp_path):
    code = cli.main(
        ["sweep", str(scenario_file), "--param", "workload.rate_rps",
         "--values", "-2", "--seeds", "1", "--out", str(tmp_path / "s2")]
    )
    assert code == 2
