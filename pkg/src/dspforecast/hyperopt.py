"""Hyperparameter search: AIC enumeration for classical models, random search
with median pruning for the neural ones."""

from __future__ import annotations

import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .classical import arima as _arima
from .classical import smoothing as _smoothing
from .errors import (FitFailedError, ForecastError, InfeasibleOrderError,
                     InsufficientDataError, SearchFailedError, TrainingDivergedError)

log = logging.getLogger(__name__)

PRUNING_CHECKPOINTS = (5, 10, 20)


@dataclass(frozen=True)
class IntRange:
    """Integers ``low..high`` inclusive."""

    low: int
    high: int

    def __post_init__(self):
        if self.high < self.low:
            raise ValueError(f"empty integer range [{self.low}, {self.high}]")

    def values(self):
        return tuple(range(self.low, self.high + 1))

    def sample(self, rng):
        return int(rng.integers(self.low, self.high + 1))


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def __post_init__(self):
        if not (0 < self.low <= self.high and math.isfinite(self.high)):
            raise ValueError(f"invalid log range [{self.low}, {self.high}]")

    def values(self):
        raise TypeError("a log-uniform dimension is not enumerable")

    def sample(self, rng):
        return float(np.exp(rng.uniform(np.log(self.low), np.log(self.high))))


@dataclass(frozen=True)
class Choice:
    options: tuple

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if not self.options:
            raise ValueError("categorical dimension needs at least one option")

    def values(self):
        return self.options

    def sample(self, rng):
        return self.options[int(rng.integers(len(self.options)))]


@dataclass(frozen=True)
class SearchSpace:
    method: str
    dims: dict

    def __post_init__(self):
        if not self.dims:
            raise ValueError("search space needs at least one dimension")

    def grid(self):
        """Every configuration, in lexicographic order of the dimension values."""
        names = list(self.dims)
        for combo in itertools.product(*(self.dims[n].values() for n in names)):
            yield dict(zip(names, combo))

    def sample(self, rng) -> dict:
        return {name: dim.sample(rng) for name, dim in self.dims.items()}

    def replace(self, **dims) -> "SearchSpace":
        return SearchSpace(self.method, {**self.dims, **dims})


def default_space(method: str, period: int | None = None) -> SearchSpace:
    """Search space used when nothing else is configured."""
    if method == "ses":
        return SearchSpace("ses", {"alpha": Choice(_smoothing.SES_ALPHA_GRID)})
    if method == "tes":
        return SearchSpace("tes", {
            "alpha": Choice(_smoothing.TES_ALPHA_GRID),
            "beta": Choice(_smoothing.TES_BETA_GRID),
            "gamma": Choice(_smoothing.TES_GAMMA_GRID),
            "mode": Choice(_smoothing.SEASONALITY_MODES),
            "period": Choice((_need_period(period),)),
        })
    if method == "arima":
        return SearchSpace("arima", {"p": IntRange(0, 5), "d": Choice((0, 1)), "q": IntRange(0, 5)})
    if method == "sarima":
        return SearchSpace("sarima", {
            "p": IntRange(0, 5), "d": Choice((0, 1)), "q": IntRange(0, 5),
            "P": IntRange(0, 2), "D": Choice((0, 1)), "Q": IntRange(0, 2),
            "m": Choice((_need_period(period),)),
        })
    if method in ("gru", "cnn"):
        return SearchSpace(method, {
            "num_layers": IntRange(1, 3),
            "width": Choice((16, 32, 64, 128)),
            "learning_rate": LogUniform(1e-4, 1e-2),
            "dropout_rate": Choice((0.0, 0.1, 0.2)),
            "input_periods": Choice((1, 2, 3)),
        })
    raise ValueError(f"no search space for method {method!r}")


def _need_period(period):
    if period is None:
        raise ValueError("seasonal methods need a period")
    return int(period)


@dataclass
class Trial:
    trial_id: int
    config: dict
    objective: float = float("nan")
    status: str = "pending"  # completed | pruned | failed
    duration: float = 0.0
    pruned_epoch: Optional[int] = None
    message: str = ""
    checkpoints: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"trial_id": self.trial_id, "config": self.config, "objective": _json_float(
            self.objective), "status": self.status, "duration": self.duration,
            "pruned_epoch": self.pruned_epoch, "message": self.message}


def _json_float(x):
    return x if x is not None and math.isfinite(x) else None


@dataclass(frozen=True)
class Budget:
    max_trials: Optional[int] = 25
    max_wall_clock: Optional[float] = None
    parallelism: int = 1

    def __post_init__(self):
        if self.max_trials is None and self.max_wall_clock is None:
            raise ValueError("a budget needs max_trials or max_wall_clock")
        if self.max_trials is not None and self.max_trials < 1:
            raise ValueError("max_trials must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


def write_trace(trials, path):
    with open(path, "a") as fh:
        for t in trials:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")


# ---------------------------------------------------------------- classical


def _order_key(cfg: dict):
    total = sum(cfg.get(k, 0) for k in ("p", "q", "P", "Q"))
    return (total, tuple(cfg.get(k, 0) for k in ("p", "d", "q", "P", "D", "Q")))


def search_classical(method: str, train, space: SearchSpace | None = None,
                     period: int | None = None, trace: list | None = None):
    """Fit every configuration of ``space`` and return the minimum-AIC state.

    ARIMA/SARIMA candidates share one likelihood window (the longest
    conditioning prefix in the grid) so their AIC values are comparable.
    Ties go to the smallest total order, then the lexicographically smallest
    ``(p, d, q, P, D, Q)``. Failed fits are skipped and, when ``trace`` is a
    list, recorded there as failed trials.
    """
    y = _arima.as_array(train)
    space = space or default_space(method, period)
    configs = list(space.grid())
    if method == "ses":
        alphas = tuple(c["alpha"] for c in configs)
        return _smoothing.fit_ses(y, alphas)
    if method == "tes":
        return _search_tes(y, configs)
    if method not in ("arima", "sarima"):
        raise ValueError(f"search_classical does not handle {method!r}")

    orders = [_sarima_order(c) for c in configs]
    feasible = [o for o in orders if not o.seasonal
                or (o.m * max(o.P, o.Q, o.D) < y.size and y.size >= 3 * o.m)]
    n_cond = max((o.n_conditioning() for o in feasible), default=0)
    best, best_key = None, None
    for trial_id, (cfg, order) in enumerate(zip(configs, orders)):
        t0 = time.monotonic()
        trial = Trial(trial_id, cfg)
        try:
            state = _arima.fit_sarima(y, order, n_cond=n_cond)
        except (FitFailedError, InsufficientDataError, InfeasibleOrderError) as exc:
            trial.status, trial.message = "failed", str(exc)
        else:
            trial.status, trial.objective = "completed", state.aic
            key = (state.aic,) + _order_key(cfg)
            if np.isfinite(state.aic) and (best_key is None or key < best_key):
                best, best_key = state, key
        trial.duration = time.monotonic() - t0
        if trace is not None:
            trace.append(trial)
    if best is None:
        raise SearchFailedError(f"every {method} candidate failed to fit")
    return best


def _sarima_order(cfg: dict):
    base = _arima.ArimaOrder(int(cfg.get("p", 0)), int(cfg.get("d", 0)), int(cfg.get("q", 0)))
    if "m" not in cfg:
        return _arima.SarimaOrder(base)
    return _arima.SarimaOrder(base, int(cfg.get("P", 0)), int(cfg.get("D", 0)),
                              int(cfg.get("Q", 0)), int(cfg["m"]))


def _search_tes(y, configs):
    period = configs[0]["period"]
    values = {k: tuple(dict.fromkeys(c[k] for c in configs))
              for k in ("alpha", "beta", "gamma", "mode")}
    try:
        return _smoothing.fit_tes(y, period, alphas=values["alpha"], betas=values["beta"],
                                  gammas=values["gamma"], modes=values["mode"])
    except FitFailedError as exc:
        raise SearchFailedError(str(exc)) from exc


# ------------------------------------------------------------------- neural


@dataclass(frozen=True)
class NeuralSettings:
    """Training settings that are fixed during a neural search."""

    batch_size: int = 32
    max_epochs: int = 100
    early_stop_patience: int = 10
    kernel_size: int = 3
    checkpoints: tuple = PRUNING_CHECKPOINTS
    min_completed_for_pruning: int = 2


def build_config(arch: str, cfg: dict, horizon: int, period: int, kernel_size: int = 3):
    from .neural.models import CNNConfig, GRUConfig
    input_len = int(cfg["input_periods"]) * int(period)
    if arch == "gru":
        return GRUConfig(input_len=input_len, hidden_size=int(cfg["width"]),
                         num_layers=int(cfg["num_layers"]),
                         dropout_rate=float(cfg["dropout_rate"]), horizon=horizon)
    if arch == "cnn":
        return CNNConfig(input_len=input_len, channels=(int(cfg["width"]),) * int(cfg["num_layers"]),
                         kernel_size=kernel_size, dropout_rate=float(cfg["dropout_rate"]),
                         horizon=horizon)
    raise ValueError(f"unknown architecture {arch!r}")


class MedianPruner:
    """Prune when the value at a checkpoint exceeds the median of completed trials there.

    ``history`` maps checkpoint epoch to the values reached by completed
    trials; it is a snapshot, so decisions do not depend on trials that
    finish while this one runs.
    """

    def __init__(self, history: dict, checkpoints=PRUNING_CHECKPOINTS, min_completed: int = 2):
        self.history = {int(k): list(v) for k, v in history.items()}
        self.checkpoints = tuple(checkpoints)
        self.min_completed = min_completed
        self.seen = {}

    def __call__(self, epoch: int, value: float) -> bool:
        if epoch not in self.checkpoints:
            return False
        self.seen[epoch] = value
        previous = self.history.get(epoch, [])
        if len(previous) < self.min_completed:
            return False
        return value > float(np.median(previous))


def _run_trial(arch, cfg, trial_id, train, val, horizon, period, settings, seed, history):
    from .neural.train import TrainConfig, TrialPruned, fit_model
    trial = Trial(trial_id, dict(cfg))
    t0 = time.monotonic()
    pruner = MedianPruner(history, settings.checkpoints, settings.min_completed_for_pruning)
    model = None
    try:
        config = build_config(arch, cfg, horizon, period, settings.kernel_size)
        tc = TrainConfig(learning_rate=float(cfg["learning_rate"]),
                         batch_size=settings.batch_size, max_epochs=settings.max_epochs,
                         early_stop_patience=settings.early_stop_patience, seed=seed)
        model = fit_model(config, train, val, tc, report=pruner)
        trial.status, trial.objective = "completed", float(model.val_smape)
    except TrialPruned as exc:
        trial.status, trial.pruned_epoch, trial.objective = "pruned", exc.epoch, exc.value
    except (TrainingDivergedError, ForecastError, ValueError, FloatingPointError) as exc:
        trial.status, trial.message = "failed", f"{type(exc).__name__}: {exc}"
    trial.checkpoints = dict(pruner.seen)
    trial.duration = time.monotonic() - t0
    return trial, model


def _trial_seed(seed: int, trial_id: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(trial_id)]).generate_state(1)[0])


@dataclass
class NeuralSearchResult:
    model: Any
    trials: list

    @property
    def best_trial(self) -> Trial:
        done = [t for t in self.trials if t.status == "completed"]
        return min(done, key=lambda t: (t.objective, t.trial_id))


def search_neural(arch: str, train, val, horizon: int, period: int,
                  space: SearchSpace | None = None, budget: Budget | None = None,
                  seed: int = 0, settings: NeuralSettings | None = None,
                  trace_path=None) -> NeuralSearchResult:
    """Seeded random search with median pruning; returns the best completed model.

    Configurations are drawn up front from a generator seeded with ``seed``,
    so trial ``i`` always gets the same configuration and training seed.
    Trials run in rounds of ``budget.parallelism``; each round prunes against
    the trials completed before it started, which keeps the outcome
    reproducible for any parallelism.
    """
    space = space or default_space(arch)
    budget = budget or Budget()
    settings = settings or NeuralSettings()
    train = _arima.as_array(train)
    val = _arima.as_array(val)
    space = _restrict_input_len(space, train.size, period, horizon)
    rng = np.random.default_rng(seed)
    limit = budget.max_trials if budget.max_trials is not None else 10 ** 6
    deadline = None if budget.max_wall_clock is None else time.monotonic() + budget.max_wall_clock

    trials, best_model, best_key = [], None, None
    history: dict = {}
    next_id = 0
    pool = ProcessPoolExecutor(budget.parallelism) if budget.parallelism > 1 else None
    try:
        while next_id < limit and (deadline is None or time.monotonic() < deadline):
            batch = []
            for _ in range(min(budget.parallelism, limit - next_id)):
                batch.append((next_id, space.sample(rng)))
                next_id += 1
            args = [(arch, cfg, tid, train, val, horizon, period, settings,
                     _trial_seed(seed, tid), history) for tid, cfg in batch]
            if pool is None:
                outcomes = [_run_trial(*a) for a in args]
            else:
                outcomes = list(pool.map(_run_trial, *zip(*args)))
            for trial, model in outcomes:
                trials.append(trial)
                log.info("%s trial %d %s objective=%s", arch, trial.trial_id, trial.status,
                         trial.objective)
                if trial.status != "completed":
                    continue
                for epoch, value in trial.checkpoints.items():
                    history.setdefault(epoch, []).append(value)
                key = (trial.objective, trial.trial_id)
                if best_key is None or key < best_key:
                    best_model, best_key = model, key
    finally:
        if pool is not None:
            pool.shutdown()
    if trace_path is not None:
        write_trace(trials, trace_path)
    if best_model is None:
        raise SearchFailedError(f"no {arch} trial completed ({len(trials)} attempted)")
    return NeuralSearchResult(best_model, trials)


def _restrict_input_len(space: SearchSpace, n_train: int, period: int, horizon: int):
    """Drop context lengths longer than half the training segment."""
    dim = space.dims.get("input_periods")
    if dim is None:
        return space
    allowed = tuple(k for k in dim.values() if k * period <= n_train / 2
                    and k * period >= horizon)
    if not allowed:
        raise InsufficientDataError(
            f"training segment of {n_train} points admits no input length in {dim.values()}")
    return space.replace(input_periods=Choice(allowed))
