import json

import numpy as np
import pytest

from dspforecast.cli import EXIT_DATA, EXIT_FAILURES, EXIT_OK, EXIT_USAGE, main
from dspforecast.csvio import read_csv


def write_config(path, **overrides):
    cfg = {
        "datasets": [{"id": "s", "path": "trace.csv", "step": 3600}],
        "rates": ["1h"],
        "methods": ["last_obs", "ses"],
        "adjustment": {"noise_sigma": 0.01, "seed": 1},
        "budget": {"max_trials": 1},
        "neural": {"max_epochs": 2, "early_stop_patience": 1},
        "seed": 0,
        "out": "out",
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def workspace(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "trace.csv"), "--days", "8",
                 "--seed", "3"]) == EXIT_OK
    return tmp_path


def test_synth_writes_trace_and_sidecar(workspace):
    series = read_csv(workspace / "trace.csv")
    assert len(series) == 8 * 24 and series.step == 3600
    meta = json.loads((workspace / "trace.json").read_text())
    assert meta["seed"] == 3 and meta["days"] == 8


def test_synth_is_seeded(tmp_path):
    for name in ("a", "b"):
        main(["synth", "--out", str(tmp_path / f"{name}.csv"), "--days", "2", "--seed", "5"])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_prepare_run_report(workspace, capsys):
    config = str(write_config(workspace / "cfg.json", rates=["5min", "15min", "1h"]))
    assert main(["prepare", "--config", config]) == EXIT_OK
    prepared = workspace / "out" / "prepared"
    for rate in ("5min", "15min", "1h"):
        s = read_csv(prepared / f"s_{rate}.csv")
        assert np.mean(s.values) == pytest.approx(108_000, abs=1e-3)
        assert np.std(s.values) == pytest.approx(12_000, abs=1e-3)
    meta = json.loads((prepared / "s_5min.json").read_text())
    assert meta["noise_injected"] and meta["seed"] == 1 and meta["original_step"] == 3600

    assert main(["run", "--config", config, "--rates", "1h"]) == EXIT_OK
    lines = (workspace / "out" / "results.jsonl").read_text().splitlines()
    assert len(lines) == 2
    assert {json.loads(x)["spec"]["method"] for x in lines} == {"last_obs", "ses"}

    assert main(["run", "--config", config, "--rates", "1h", "--methods", "ses"]) == EXIT_OK
    lines = (workspace / "out" / "results.jsonl").read_text().splitlines()
    assert [json.loads(x)["spec"]["method"] for x in lines] == ["ses"]

    capsys.readouterr()
    assert main(["report", "--config", config]) == EXIT_OK
    assert "| 1h | s |" in capsys.readouterr().out
    report = workspace / "out" / "report"
    assert len((report / "table_smape.csv").read_text().splitlines()) == 2
    assert len((report / "plot_means.csv").read_text().splitlines()) == 1 + 1

    for cmd in ("prepare", "run", "report"):
        manifest = json.loads((workspace / "out" / f"manifest_{cmd}.json").read_text())
        assert len(manifest["config_sha256"]) == 64
        assert manifest["seed"] == 0 and "tool_version" in manifest


def test_prepare_is_idempotent(workspace):
    config = str(write_config(workspace / "cfg.json", rates=["15min"]))
    main(["prepare", "--config", config])
    first = (workspace / "out" / "prepared" / "s_15min.csv").read_bytes()
    main(["prepare", "--config", config])
    assert (workspace / "out" / "prepared" / "s_15min.csv").read_bytes() == first


def test_fine_origin_gets_no_noise(tmp_path):
    main(["synth", "--out", str(tmp_path / "trace.csv"), "--days", "3", "--step", "300"])
    config = str(write_config(tmp_path / "cfg.json", rates=["5min"],
                              datasets=[{"id": "s", "path": "trace.csv"}]))
    assert main(["prepare", "--config", config]) == EXIT_OK
    meta = json.loads((tmp_path / "out" / "prepared" / "s_5min.json").read_text())
    assert not meta["noise_injected"] and meta["noise_sigma"] == 0.0


def test_dry_run_full_grid(tmp_path, capsys):
    datasets = [{"id": f"d{i}", "path": f"missing{i}.csv"} for i in range(9)]
    config = str(write_config(tmp_path / "cfg.json", datasets=datasets,
                              rates=["5min", "15min", "1h"],
                              methods=["ses", "tes", "arima", "sarima", "prophet", "gru", "cnn"]))
    assert main(["run", "--config", config, "--dry-run"]) == EXIT_OK
    cells = [json.loads(x) for x in (tmp_path / "out" / "schedule.jsonl").read_text().splitlines()]
    assert len(cells) == 189
    assert sum(c["status"] == "unavailable" for c in cells) == 36
    assert "153 scheduled" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["bogus"], ["run", "--config", "/nonexistent.json"],
                                  ["run", "--parallelism", "0"], ["synth"]])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_unknown_method_is_usage_error(workspace):
    config = str(write_config(workspace / "cfg.json"))
    assert main(["run", "--config", config, "--methods", "lstm"]) == EXIT_USAGE


def test_unknown_config_key(workspace):
    config = str(write_config(workspace / "cfg.json", colour="red"))
    assert main(["run", "--config", config]) == EXIT_USAGE


def test_missing_prepared_data_names_prepare(workspace, capsys):
    config = str(write_config(workspace / "cfg.json"))
    assert main(["run", "--config", config]) == EXIT_DATA
    assert "prepare" in capsys.readouterr().err


def test_malformed_csv_reports_line(tmp_path, capsys):
    (tmp_path / "trace.csv").write_text("timestamp,value\n0,1\n3600,x\n")
    config = str(write_config(tmp_path / "cfg.json"))
    assert main(["prepare", "--config", config]) == EXIT_DATA
    err = capsys.readouterr().err
    assert "trace.csv:3:" in err


def test_missing_dataset_file(tmp_path):
    config = str(write_config(tmp_path / "cfg.json"))
    assert main(["prepare", "--config", config]) == EXIT_DATA


def test_empty_results_is_data_error(tmp_path):
    config = str(write_config(tmp_path / "cfg.json"))
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / "results.jsonl").write_text("")
    assert main(["report", "--config", config]) == EXIT_DATA


def test_failed_cells_give_exit_3(workspace):
    config = str(write_config(workspace / "cfg.json", methods=["last_obs", "tes"]))
    main(["prepare", "--config", config])
    # overwrite the prepared trace with one too short for two seasons of training
    short = workspace / "out" / "prepared" / "s_1h.csv"
    rows = short.read_text().splitlines()[:60]
    short.write_text("\n".join(rows) + "\n")
    assert main(["run", "--config", config]) == EXIT_FAILURES
    results = [json.loads(x) for x in (workspace / "out" / "results.jsonl").read_text().splitlines()]
    assert [r["status"] for r in results] == ["ok", "failed"]
