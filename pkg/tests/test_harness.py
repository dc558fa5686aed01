import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dspforecast.classical import LastDay, LastObservation
from dspforecast.harness import (CANDIDATE_METHODS, ExperimentResult, ExperimentSpec,
                                 HistoryProbe, RunSettings, aggregate, build_grid, mark_row,
                                 read_results, rolling_evaluate, run_experiment, run_grid,
                                 schedule, strip_durations, unavailable_reason, write_report,
                                 write_results)
from dspforecast.metrics import rmse, smape
from dspforecast.series import RateProfile, UniformSeries

HOUR = RateProfile.ONE_HOUR


def hourly(values):
    return UniformSeries(0.0, 3600.0, np.asarray(values, dtype=float))


def periodic(days=20, period=24):
    return np.tile(np.random.default_rng(0).uniform(50, 150, period), days)


# rolling evaluation

@given(st.lists(st.floats(1, 1e4), min_size=2, max_size=40), st.integers(1, 12))
def test_last_obs_pooled_metrics_match_brute_force(test, h):
    test = np.asarray(test)
    if test.size < h:
        return
    history = np.array([7.0, 9.0])
    outcome = rolling_evaluate(LastObservation().fit(history), test, h)
    actual, predicted = [], []
    full = np.r_[history, test]
    for i in range(test.size - h + 1):
        origin = history.size + i
        actual.extend(full[origin:origin + h])
        predicted.extend([full[origin - 1]] * h)
    assert outcome.n_windows == test.size - h + 1
    assert smape(outcome.actual.reshape(-1), outcome.predicted.reshape(-1)) == \
        pytest.approx(smape(actual, predicted), abs=1e-12)
    assert rmse(outcome.actual.reshape(-1), outcome.predicted.reshape(-1)) == \
        pytest.approx(rmse(actual, predicted), rel=1e-12)


def test_pooled_not_mean_of_window_means():
    test = np.array([1.0, 10.0, 100.0])
    outcome = rolling_evaluate(LastObservation().fit([1.0]), test, 2)
    pooled = smape(outcome.actual.reshape(-1), outcome.predicted.reshape(-1))
    assert pooled == pytest.approx(100 * np.mean([0, 9 / 11, 9 / 11, 99 / 101]))
    assert outcome.n_windows == 2


def test_no_look_ahead():
    probe = HistoryProbe().fit(np.arange(10.0))
    test = np.arange(10.0, 30.0)
    rolling_evaluate(probe, test, 4)
    assert len(probe.visible_at_predict) == 17
    for i, seen in enumerate(probe.visible_at_predict):
        np.testing.assert_array_equal(seen, np.arange(10.0 + i))


def test_horizon_longer_than_test():
    from dspforecast.errors import ForecastError
    with pytest.raises(ForecastError):
        rolling_evaluate(LastObservation().fit([1.0]), [1.0, 2.0], 3)


def test_last_day_on_periodic_data_is_exact():
    spec = ExperimentSpec("p", HOUR, "last_day")
    result = run_experiment(spec, hourly(periodic()))
    assert result.status == "ok"
    assert result.smape == 0 and result.rmse == 0
    assert result.n_windows == 96 - 12 + 1


@pytest.mark.parametrize("rate", list(RateProfile))
def test_horizon_follows_rate(rate):
    n = 4 * rate.seasonal_period
    series = UniformSeries(0.0, rate.step_seconds, np.arange(1.0, n + 1))
    result = run_experiment(ExperimentSpec("x", rate, "last_obs"), series)
    assert result.n_windows == n - int(0.8 * n) - rate.horizon + 1


def test_step_must_match_rate():
    with pytest.raises(ValueError):
        run_experiment(ExperimentSpec("x", HOUR, "last_obs"),
                       UniformSeries(0.0, 300.0, np.arange(100.0)))


def test_neural_methods_share_the_test_segment():
    series = hourly(periodic(days=10))
    probe_c, probe_n = HistoryProbe(), HistoryProbe()
    a = run_experiment(ExperimentSpec("x", HOUR, "ses"), series, forecaster=probe_c)
    b = run_experiment(ExperimentSpec("x", HOUR, "gru"), series, forecaster=probe_n)
    assert a.n_windows == b.n_windows
    np.testing.assert_array_equal(probe_c.visible_at_predict[0], probe_n.visible_at_predict[0])
    assert ExperimentSpec("x", HOUR, "gru").split.fractions == (0.6, 0.2, 0.2)
    assert ExperimentSpec("x", HOUR, "tes").split.fractions == (0.8, 0.2)


# grid

def test_full_grid_shape():
    specs = build_grid([f"d{i}" for i in range(9)], list(RateProfile), CANDIDATE_METHODS)
    assert len(specs) == 189
    off = [s for s in specs if not s.available]
    assert len(off) == 9 + 27
    assert {(s.method, s.rate) for s in off} == \
        {("sarima", RateProfile.FIVE_MIN)} | {("prophet", r) for r in RateProfile}
    cells = schedule(specs)
    assert sum(c["status"] == "scheduled" for c in cells) == 189 - 36


def test_unavailable_reasons():
    assert unavailable_reason("sarima", RateProfile.FIFTEEN_MIN) is None
    assert "infeasible" in unavailable_reason("sarima", RateProfile.FIVE_MIN)
    assert unavailable_reason("prophet", HOUR)
    assert unavailable_reason("lstm", HOUR)


def test_single_cell_grid_and_unavailable_cells():
    data = {("a", "1h"): hourly(periodic())}
    results = run_grid([ExperimentSpec("a", HOUR, "last_day"),
                        ExperimentSpec("a", HOUR, "prophet"),
                        ExperimentSpec("b", HOUR, "last_obs")], data)
    assert [r.status for r in results] == ["ok", "unavailable", "failed"]
    assert "no prepared data" in results[2].message


def test_failed_cell_does_not_stop_grid():
    data = {("a", "1h"): hourly(np.arange(1.0, 59.0))}
    results = run_grid([ExperimentSpec("a", HOUR, "tes"),
                        ExperimentSpec("a", HOUR, "last_obs")], data)
    assert [r.status for r in results] == ["failed", "ok"]


def test_grid_rerun_is_identical(tmp_path):
    y = periodic(days=12) + np.random.default_rng(4).normal(0, 2, 288)
    data = {("a", "1h"): hourly(y)}
    specs = build_grid(["a"], [HOUR], ["last_obs", "last_day", "ses", "tes", "arima"])
    runs = []
    for k in range(2):
        path = tmp_path / f"r{k}.jsonl"
        write_results(run_grid(specs, data), path)
        runs.append([strip_durations(line) for line in path.read_text().splitlines()])
    assert runs[0] == runs[1]


# results and tables

def test_result_json_round_trip(tmp_path):
    spec = ExperimentSpec("a", RateProfile.FIFTEEN_MIN, "ses", seed=3, refit_every=5)
    r = ExperimentResult(spec, "ok", 1.5, 20.0, 0.1, 0.01, 10, {"alpha": np.float64(0.3)})
    u = ExperimentResult(ExperimentSpec("a", RateProfile.FIVE_MIN, "sarima"), "unavailable")
    write_results([r, u], tmp_path / "r.jsonl")
    back = read_results(tmp_path / "r.jsonl")
    assert back[0].spec == spec and back[0].smape == 1.5 and back[0].provenance == {"alpha": 0.3}
    assert back[1].status == "unavailable" and np.isnan(back[1].smape)
    line = (tmp_path / "r.jsonl").read_text().splitlines()[0]
    assert "fit_duration" not in json.loads(strip_durations(line))


def test_mark_row_table_example():
    row = {"last_obs": 4.21, "last_day": 1.44, "ses": 4.20, "tes": 1.02, "arima": 3.9}
    best, beats = mark_row(row)
    assert best == {"tes"}
    assert beats == {"tes"}


def test_mark_row_rules():
    best, beats = mark_row({"last_obs": 2.0, "last_day": 3.0, "ses": 2.5, "tes": 2.0})
    assert best == {"last_obs", "tes"}
    assert beats == set()  # equal to a baseline is not strictly better
    assert mark_row({"ses": 5.0}) == ({"ses"}, set())
    assert mark_row({"last_obs": 1.0, "last_day": 1.0, "ses": float("nan")}) == \
        ({"last_obs", "last_day"}, set())


def make_results():
    out = []
    for ds, base in (("a", 1.0), ("b", 2.0)):
        for rate in (HOUR, RateProfile.FIVE_MIN):
            for m, v in (("last_obs", 3.0), ("last_day", 2.0), ("tes", 1.0), ("ses", 4.0)):
                out.append(ExperimentResult(ExperimentSpec(ds, rate, m), "ok", base * v,
                                            10 * base * v, 1.0, 0.1, 5))
            out.append(ExperimentResult(ExperimentSpec(ds, rate, "prophet"), "unavailable"))
    return out


def test_aggregate_table_and_means(tmp_path):
    report = aggregate(make_results())
    table = report.table
    assert table.rows == [("5min", "a"), ("5min", "b"), ("1h", "a"), ("1h", "b")]
    assert table.columns == ["last_obs", "last_day", "ses", "tes", "prophet"]
    assert ((("1h", "b")), "tes") in table.best
    assert all(m == "tes" for _, m in table.beats_baselines)
    md = table.to_markdown()
    assert "**2.00*" in md and "| 1h | a |" in md
    assert len(report.means) == len(table.columns) * 2
    tes_1h = next(m for m in report.means if m["method"] == "tes" and m["rate"] == "1h")
    assert tes_1h["mean_smape"] == pytest.approx(1.5) and tes_1h["n_cells"] == 2
    files = write_report(report, tmp_path)
    assert {f.name for f in files} == {"table_smape.csv", "table_rmse.csv", "table_smape.md",
                                       "table_rmse.md", "plot_means.csv"}
    plot_rows = (tmp_path / "plot_means.csv").read_text().splitlines()
    assert len(plot_rows) == 1 + len(table.columns) * 2


def test_single_cell_aggregate():
    r = ExperimentResult(ExperimentSpec("a", HOUR, "ses"), "ok", 3.0, 1.0)
    report = aggregate([r])
    assert report.table.best == {(("1h", "a"), "ses")}
    with pytest.raises(ValueError):
        aggregate([])


def test_run_settings_reach_neural_forecaster():
    from dspforecast.harness import make_forecaster
    f = make_forecaster(ExperimentSpec("a", HOUR, "cnn", seed=9), RunSettings(max_trials=3))
    assert f.budget.max_trials == 3 and f.seed == 9 and f.horizon == 12 and f.period == 24
    assert isinstance(make_forecaster(ExperimentSpec("a", HOUR, "last_day")), LastDay)


def test_sarima_cell_on_short_history_does_not_crash():
    y = periodic(days=3)[:70] + np.random.default_rng(1).normal(0, 1, 70)
    result = run_experiment(ExperimentSpec("a", HOUR, "sarima"), hourly(y))
    assert result.status == "ok"
    assert result.provenance["seasonal_order"][:3] == [0, 0, 0]
