"""Experiment grid, rolling-origin evaluation, timing and result tables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .classical import SES, TES, Arima, LastDay, LastObservation, Sarima
from .classical.base import Forecaster, as_array
from .errors import ForecastError, MethodUnavailableError
from .hyperopt import Budget, NeuralSettings, default_space
from .metrics import rmse, smape
from .series import CLASSICAL_SPLIT, NEURAL_SPLIT, RateProfile, SplitSpec, UniformSeries, split

log = logging.getLogger(__name__)

BASELINES = ("last_obs", "last_day")
CANDIDATE_METHODS = ("ses", "tes", "arima", "sarima", "prophet", "gru", "cnn")
ALL_METHODS = BASELINES + CANDIDATE_METHODS
NEURAL_METHODS = frozenset({"gru", "cnn"})
DURATION_FIELDS = ("fit_duration", "mean_predict_duration")


def unavailable_reason(method: str, rate: RateProfile) -> Optional[str]:
    """Why a (method, rate) cell cannot run, or None when it can."""
    if method == "prophet":
        return "prophet is not implemented"
    if method == "sarima" and rate is RateProfile.FIVE_MIN:
        return "SARIMA with a 288-step season is computationally infeasible"
    if method not in ALL_METHODS:
        return f"unknown method {method!r}"
    return None


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str
    rate: RateProfile
    method: str
    seed: int = 0
    refit_every: Optional[int] = None

    @property
    def split(self) -> SplitSpec:
        return NEURAL_SPLIT if self.method in NEURAL_METHODS else CLASSICAL_SPLIT

    @property
    def available(self) -> bool:
        return unavailable_reason(self.method, self.rate) is None

    @property
    def key(self) -> tuple:
        return (self.dataset, self.rate.label, self.method)

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "rate": self.rate.label, "method": self.method,
                "seed": self.seed, "refit_every": self.refit_every,
                "split": list(self.split.fractions)}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        return cls(data["dataset"], RateProfile.parse(data["rate"]), data["method"],
                   int(data.get("seed", 0)), data.get("refit_every"))


@dataclass(frozen=True)
class RunSettings:
    """Knobs shared by every cell of a run."""

    max_trials: int = 25
    max_wall_clock: Optional[float] = None
    trial_parallelism: int = 1
    neural: NeuralSettings = field(default_factory=NeuralSettings)
    trace_dir: Optional[str] = None


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    status: str  # ok | unavailable | failed
    smape: float = float("nan")
    rmse: float = float("nan")
    fit_duration: float = 0.0
    mean_predict_duration: float = 0.0
    n_windows: int = 0
    provenance: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "status": self.status,
                "smape": _finite_or_none(self.smape), "rmse": _finite_or_none(self.rmse),
                "fit_duration": self.fit_duration,
                "mean_predict_duration": self.mean_predict_duration,
                "n_windows": self.n_windows, "provenance": _jsonable(self.provenance),
                "message": self.message}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentResult":
        nan = float("nan")
        return cls(ExperimentSpec.from_dict(data["spec"]), data["status"],
                   nan if data.get("smape") is None else float(data["smape"]),
                   nan if data.get("rmse") is None else float(data["rmse"]),
                   float(data.get("fit_duration", 0.0)),
                   float(data.get("mean_predict_duration", 0.0)),
                   int(data.get("n_windows", 0)), data.get("provenance", {}),
                   data.get("message", ""))


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _finite_or_none(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_results(results: Iterable[ExperimentResult], path) -> None:
    with open(path, "w") as fh:
        for r in results:
            fh.write(r.to_json() + "\n")


def read_results(path) -> list[ExperimentResult]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(ExperimentResult.from_dict(json.loads(line)))
    return out


def strip_durations(line: str) -> str:
    """A result line with duration fields removed, for reproducibility checks."""
    data = json.loads(line)
    for name in DURATION_FIELDS:
        data.pop(name, None)
    return json.dumps(data, sort_keys=True)


# ----------------------------------------------------------------- execution


def make_forecaster(spec: ExperimentSpec, settings: RunSettings | None = None) -> Forecaster:
    settings = settings or RunSettings()
    reason = unavailable_reason(spec.method, spec.rate)
    if reason:
        raise MethodUnavailableError(reason)
    period, horizon = spec.rate.seasonal_period, spec.rate.horizon
    m = spec.method
    if m == "last_obs":
        return LastObservation()
    if m == "last_day":
        return LastDay(period)
    if m == "ses":
        return SES(refit_every=spec.refit_every)
    if m == "tes":
        return TES(period, refit_every=spec.refit_every)
    if m == "arima":
        return Arima(space=default_space("arima"), refit_every=spec.refit_every)
    if m == "sarima":
        return Sarima(space=default_space("sarima", period), refit_every=spec.refit_every)
    from .neural import NeuralForecaster
    trace = None
    if settings.trace_dir is not None:
        trace = Path(settings.trace_dir) / f"trace_{spec.dataset}_{spec.rate.label}_{m}.jsonl"
        trace.parent.mkdir(parents=True, exist_ok=True)
        trace.unlink(missing_ok=True)
    budget = Budget(settings.max_trials, settings.max_wall_clock, settings.trial_parallelism)
    return NeuralForecaster(m, horizon, period, budget=budget, settings=settings.neural,
                            seed=spec.seed, trace_path=trace)


@dataclass
class RollingOutcome:
    actual: np.ndarray  # (n_windows, horizon)
    predicted: np.ndarray
    step_durations: np.ndarray

    @property
    def n_windows(self) -> int:
        return self.actual.shape[0]


def rolling_evaluate(forecaster: Forecaster, test, horizon: int) -> RollingOutcome:
    """Stride-1 rolling origin over ``test`` with a one-observation update per step.

    The forecaster must already be fitted on everything before ``test``.
    Window ``i`` predicts ``test[i:i + horizon]`` having seen ``test[:i]``;
    windows that would run past the end of ``test`` are skipped.
    """
    test = as_array(test)
    n_windows = test.size - horizon + 1
    if n_windows < 1:
        raise ForecastError(f"test segment of {test.size} points is shorter than horizon {horizon}")
    actual = np.empty((n_windows, horizon))
    predicted = np.empty((n_windows, horizon))
    durations = np.empty(n_windows)
    for i in range(n_windows):
        t0 = time.perf_counter()
        pred = np.asarray(forecaster.predict(horizon), dtype=float)
        if i + 1 < n_windows:
            forecaster.update(test[i:i + 1])
        durations[i] = time.perf_counter() - t0
        if pred.shape != (horizon,) or not np.all(np.isfinite(pred)):
            raise ForecastError(f"{forecaster.method} returned an invalid forecast at window {i}")
        predicted[i] = pred
        actual[i] = test[i:i + horizon]
    return RollingOutcome(actual, predicted, durations)


def run_experiment(spec: ExperimentSpec, series: UniformSeries,
                   settings: RunSettings | None = None,
                   forecaster: Forecaster | None = None) -> ExperimentResult:
    """Split, fit (timed), then evaluate on the test segment by rolling origin.

    SMAPE and RMSE are pooled over every (window, step) pair.
    """
    reason = unavailable_reason(spec.method, spec.rate)
    if reason:
        return ExperimentResult(spec, "unavailable", message=reason)
    if series.step != spec.rate.step_seconds:
        raise ValueError(f"series step {series.step}s does not match rate {spec.rate.label}")
    segments = split(series, spec.split)
    forecaster = forecaster or make_forecaster(spec, settings)
    t0 = time.perf_counter()
    if len(segments) == 3:
        forecaster.fit(segments[0], segments[1])
    else:
        forecaster.fit(segments[0])
    fit_duration = time.perf_counter() - t0
    outcome = rolling_evaluate(forecaster, segments[-1], spec.rate.horizon)
    provenance = forecaster.to_dict()
    trials = getattr(forecaster, "trials", None)
    if trials:
        provenance["trials"] = {s: sum(t.status == s for t in trials)
                                for s in ("completed", "pruned", "failed")}
    return ExperimentResult(
        spec, "ok",
        smape=smape(outcome.actual.reshape(-1), outcome.predicted.reshape(-1)),
        rmse=rmse(outcome.actual.reshape(-1), outcome.predicted.reshape(-1)),
        fit_duration=fit_duration,
        mean_predict_duration=float(outcome.step_durations.mean()),
        n_windows=outcome.n_windows,
        provenance=provenance,
    )


def build_grid(datasets: Iterable[str], rates: Iterable[RateProfile] = tuple(RateProfile),
               methods: Iterable[str] = CANDIDATE_METHODS, seed: int = 0,
               refit_every: Optional[int] = None) -> list[ExperimentSpec]:
    """Every (dataset, rate, method) cell, including unavailable ones."""
    return [ExperimentSpec(d, r, m, seed, refit_every)
            for d in datasets for r in rates for m in methods]


def schedule(specs: Iterable[ExperimentSpec]) -> list[dict]:
    """Dry-run view of a grid: one record per cell with its availability."""
    out = []
    for spec in specs:
        reason = unavailable_reason(spec.method, spec.rate)
        out.append({**spec.to_dict(), "status": "unavailable" if reason else "scheduled",
                    "reason": reason or ""})
    return out


def _run_cell(spec, series, settings):
    try:
        return run_experiment(spec, series, settings)
    except (ForecastError, ValueError, FloatingPointError) as exc:
        log.warning("cell %s failed: %s", spec.key, exc)
        return ExperimentResult(spec, "failed", message=f"{type(exc).__name__}: {exc}")


def run_grid(specs: list[ExperimentSpec], data: dict, settings: RunSettings | None = None,
             parallelism: int = 1,
             on_result: Callable[[ExperimentResult], None] | None = None
             ) -> list[ExperimentResult]:
    """Run every cell; failures are recorded and do not stop the grid.

    ``data`` maps ``(dataset, rate_label)`` to a :class:`UniformSeries`.
    Results come back in ``specs`` order whatever the parallelism.
    """
    if not specs:
        raise ValueError("no experiments to run")
    settings = settings or RunSettings()
    results: list[ExperimentResult] = []

    def series_for(spec):
        if not spec.available:
            return None
        try:
            return data[(spec.dataset, spec.rate.label)]
        except KeyError:
            raise ForecastError(f"no prepared data for {spec.dataset}@{spec.rate.label}")

    if parallelism <= 1:
        for spec in specs:
            try:
                result = _run_cell(spec, series_for(spec), settings)
            except ForecastError as exc:
                result = ExperimentResult(spec, "failed", message=str(exc))
            results.append(result)
            if on_result:
                on_result(result)
        return results
    with ProcessPoolExecutor(parallelism) as pool:
        futures = [pool.submit(_run_cell, s, series_for(s), settings) for s in specs]
        for fut in futures:
            result = fut.result()
            results.append(result)
            if on_result:
                on_result(result)
    return results


# --------------------------------------------------------------- aggregation


@dataclass
class ResultTable:
    """SMAPE and RMSE by (rate, dataset) row and method column, with markers."""

    rows: list
    columns: list
    smape: dict
    rmse: dict
    best: set
    beats_baselines: set

    def cell(self, row, method, metric="smape"):
        return getattr(self, metric).get((row, method), float("nan"))

    def to_csv(self, metric: str = "smape") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rate", "dataset"] + self.columns)
        for row in self.rows:
            w.writerow(list(row) + [_fmt(self.cell(row, m, metric), 6) for m in self.columns])
        return buf.getvalue()

    def to_markdown(self, metric: str = "smape") -> str:
        """``**x**`` marks the row best, ``x*`` a cell beating both baselines."""
        lines = ["| rate | dataset | " + " | ".join(self.columns) + " |",
                 "|---|---|" + "---|" * len(self.columns)]
        for row in self.rows:
            cells = []
            for m in self.columns:
                text = _fmt(self.cell(row, m, metric), 2) or "-"
                if metric == "smape" and (row, m) in self.beats_baselines:
                    text += "*"
                if metric == "smape" and (row, m) in self.best:
                    text = f"**{text}**"
                cells.append(text)
            lines.append(f"| {row[0]} | {row[1]} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def _fmt(x, digits):
    return "" if x is None or not math.isfinite(x) else f"{x:.{digits}f}"


@dataclass
class Report:
    table: ResultTable
    means: list  # dicts: method, rate, mean_smape, mean_rmse, durations, n

    def plot_data_csv(self) -> str:
        buf = io.StringIO()
        fields = ["method", "rate", "n_cells", "mean_smape", "mean_rmse",
                  "mean_fit_duration", "mean_predict_duration"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for m in self.means:
            w.writerow({k: (_fmt(v, 6) if isinstance(v, float) else v) for k, v in m.items()})
        return buf.getvalue()


def mark_row(values: dict) -> tuple[set, set]:
    """Best methods (row minimum, ties included) and methods beating both baselines."""
    finite = {m: v for m, v in values.items() if v is not None and math.isfinite(v)}
    if not finite:
        return set(), set()
    low = min(finite.values())
    best = {m for m, v in finite.items() if v == low}
    ref = [finite[b] for b in BASELINES if b in finite]
    beats = set()
    if len(ref) == len(BASELINES):
        floor = min(ref)
        beats = {m for m, v in finite.items() if m not in BASELINES and v < floor}
    return best, beats


def aggregate(results: list[ExperimentResult]) -> Report:
    if not results:
        raise ValueError("no results to aggregate")
    rate_order = {r.label: i for i, r in enumerate(RateProfile)}
    method_order = {m: i for i, m in enumerate(ALL_METHODS)}
    rows = sorted({(r.spec.rate.label, r.spec.dataset) for r in results},
                  key=lambda k: (rate_order[k[0]], k[1]))
    columns = sorted({r.spec.method for r in results},
                     key=lambda m: (method_order.get(m, len(method_order)), m))
    smape_cells, rmse_cells = {}, {}
    for r in results:
        if r.status == "ok":
            row = (r.spec.rate.label, r.spec.dataset)
            smape_cells[(row, r.spec.method)] = r.smape
            rmse_cells[(row, r.spec.method)] = r.rmse
    best, beats = set(), set()
    for row in rows:
        b, g = mark_row({m: smape_cells.get((row, m)) for m in columns})
        best |= {(row, m) for m in b}
        beats |= {(row, m) for m in g}
    table = ResultTable(rows, columns, smape_cells, rmse_cells, best, beats)

    means = []
    for rate in sorted({k[0] for k in rows}, key=rate_order.get):
        for method in columns:
            cells = [r for r in results if r.status == "ok" and r.spec.method == method
                     and r.spec.rate.label == rate]
            nan = float("nan")
            means.append({
                "method": method, "rate": rate, "n_cells": len(cells),
                "mean_smape": float(np.mean([c.smape for c in cells])) if cells else nan,
                "mean_rmse": float(np.mean([c.rmse for c in cells])) if cells else nan,
                "mean_fit_duration": float(np.mean([c.fit_duration for c in cells])) if cells else nan,
                "mean_predict_duration": (float(np.mean([c.mean_predict_duration for c in cells]))
                                          if cells else nan),
            })
    return Report(table, means)


def write_report(report: Report, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "table_smape.csv": report.table.to_csv("smape"),
        "table_rmse.csv": report.table.to_csv("rmse"),
        "table_smape.md": report.table.to_markdown("smape"),
        "table_rmse.md": report.table.to_markdown("rmse"),
        "plot_means.csv": report.plot_data_csv(),
    }
    paths = []
    for name, text in files.items():
        (out / name).write_text(text)
        paths.append(out / name)
    return paths


class HistoryProbe(Forecaster):
    """Instrumented forecaster that records exactly what it has been shown.

    ``visible_at_predict[i]`` is the full history available at the i-th
    ``predict`` call; its forecasts are the last visible value.
    """

    method = "probe"

    def __init__(self):
        super().__init__()
        self.history = np.empty(0)
        self.visible_at_predict = []

    def fit(self, train, val=None):
        parts = [as_array(train)] + ([as_array(val)] if val is not None else [])
        self.history = np.concatenate(parts)
        self._fitted = True
        return self

    def update(self, new_obs):
        self._check_fitted()
        self.history = np.concatenate([self.history, as_array(new_obs)])
        return self

    def predict(self, h):
        self._check_fitted()
        self.visible_at_predict.append(self.history.copy())
        return np.full(int(h), self.history[-1])
