"""Windowing, Adam training with SMAPE loss, and early stopping."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..errors import InsufficientDataError, TrainingDivergedError
from ..metrics import smape
from . import autodiff as ad
from .models import CNNConfig, GRUConfig, Normalization, config_from_dict, forward, init_params


class TrialPruned(Exception):
    def __init__(self, epoch, value):
        super().__init__(f"pruned at epoch {epoch} (validation SMAPE {value:.4f})")
        self.epoch = epoch
        self.value = value


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    early_stop_patience: int = 10
    seed: int = 0
    normalization: Optional[Normalization] = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")


@dataclass(frozen=True, eq=False)
class Windows:
    """Sliding (input, target) pairs, both in normalized units."""

    inputs: np.ndarray
    targets: np.ndarray
    norm: Normalization

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def raw_targets(self) -> np.ndarray:
        return self.norm.denormalize(self.targets)


def window_dataset(values, input_len: int, horizon: int, norm: Normalization,
                   first_target: int | None = None) -> Windows:
    """All stride-1 windows: input ``[t - input_len, t)``, target ``[t, t + horizon)``.

    ``first_target`` restricts targets to start at or after that index, which
    lets validation windows draw their context from the training segment.
    """
    values = np.asarray(getattr(values, "values", values), dtype=float).reshape(-1)
    n = values.size
    if n < input_len + horizon:
        raise InsufficientDataError(
            f"series of {n} points is too short for input_len={input_len}, horizon={horizon}")
    start = input_len if first_target is None else max(input_len, first_target)
    origins = np.arange(start, n - horizon + 1)
    if origins.size == 0:
        raise InsufficientDataError("no complete window fits after first_target")
    z = norm.normalize(values)
    idx_in = origins[:, None] + np.arange(-input_len, 0)[None, :]
    idx_out = origins[:, None] + np.arange(horizon)[None, :]
    return Windows(z[idx_in], z[idx_out], norm)


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for k, p in self.params.items():
            if p.grad is None:
                continue
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * p.grad
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * p.grad * p.grad
            p.data -= self.lr * (self.m[k] / corr1) / (np.sqrt(self.v[k] / corr2) + self.eps)


@dataclass
class TrainResult:
    params: dict
    history: list = field(default_factory=list)  # (epoch, train_loss, val_smape)
    best_epoch: int = 0
    best_val: float = float("inf")


def predict_windows(config, params, inputs: np.ndarray, norm: Normalization,
                    chunk: int = 512) -> np.ndarray:
    out = []
    for i in range(0, inputs.shape[0], chunk):
        out.append(forward(config, params, inputs[i:i + chunk], norm).data)
    return np.concatenate(out, axis=0)


def evaluate(config, params, windows: Windows) -> float:
    pred = predict_windows(config, params, windows.inputs, windows.norm)
    if not np.all(np.isfinite(pred)):
        return float("nan")
    return smape(windows.raw_targets.reshape(-1), pred.reshape(-1))


def _snapshot(params):
    return {k: v.data.copy() for k, v in params.items()}


def train(config, train_windows: Windows, val_windows: Windows, tc: TrainConfig,
          report: Callable[[int, float], bool] | None = None,
          init: dict | None = None) -> TrainResult:
    """Mini-batch Adam on de-normalized SMAPE with early stopping on validation SMAPE.

    ``report(epoch, val_smape)`` is called after every epoch; a True return
    aborts the run with :class:`TrialPruned`. Returns the parameters of the
    best validation epoch.
    """
    if len(train_windows) == 0 or len(val_windows) == 0:
        raise InsufficientDataError("training and validation windows must be non-empty")
    seeds = np.random.SeedSequence(tc.seed).spawn(3)
    init_rng, shuffle_rng, dropout_rng = (np.random.default_rng(s) for s in seeds)
    params = init_params(config, init_rng)
    if init is not None:
        for k, v in init.items():
            params[k].data[...] = v
    opt = Adam(params, tc.learning_rate)
    norm = train_windows.norm
    raw_targets = train_windows.raw_targets
    result = TrainResult(params=_snapshot(params))
    stale = 0
    n = len(train_windows)
    for epoch in range(1, tc.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        losses = []
        for b in range(0, n, tc.batch_size):
            idx = order[b:b + tc.batch_size]
            opt.zero_grad()
            pred = forward(config, params, train_windows.inputs[idx], norm,
                           training=True, rng=dropout_rng)
            if not np.all(np.isfinite(pred.data)):
                raise TrainingDivergedError(
                    "non-finite predictions",
                    {"epoch": epoch, "batch": b // tc.batch_size})
            loss = ad.smape_loss(pred, raw_targets[idx])
            if not np.isfinite(loss.data):
                raise TrainingDivergedError(
                    "non-finite training loss",
                    {"epoch": epoch, "batch": b // tc.batch_size, "loss": float(loss.data)})
            ad.backward(loss)
            opt.step()
            losses.append(float(loss.data))
        val = evaluate(config, params, val_windows)
        if not np.isfinite(val):
            raise TrainingDivergedError("non-finite validation SMAPE", {"epoch": epoch})
        result.history.append((epoch, float(np.mean(losses)), val))
        if val < result.best_val:
            result.best_val = val
            result.best_epoch = epoch
            result.params = _snapshot(params)
            stale = 0
        else:
            stale += 1
        if report is not None and report(epoch, val):
            raise TrialPruned(epoch, val)
        if stale > tc.early_stop_patience:
            break
    return result


def as_tensors(arrays: dict) -> dict:
    return {k: ad.Tensor(np.array(v, dtype=float), requires_grad=True, name=k)
            for k, v in arrays.items()}


@dataclass
class TrainedModel:
    """A trained network plus everything needed to predict with it."""

    config: GRUConfig | CNNConfig
    params: dict
    norm: Normalization
    seed: int
    train_config: dict = field(default_factory=dict)
    val_smape: float = float("nan")

    def predict(self, history, horizon: int | None = None) -> np.ndarray:
        history = np.asarray(getattr(history, "values", history), dtype=float).reshape(-1)
        horizon = self.config.horizon if horizon is None else int(horizon)
        if horizon < 1 or horizon > self.config.horizon:
            raise ValueError(f"horizon must lie in [1, {self.config.horizon}]")
        if history.size < self.config.input_len:
            raise InsufficientDataError(
                f"need {self.config.input_len} context observations, got {history.size}")
        context = self.norm.normalize(history[-self.config.input_len:])
        out = forward(self.config, self.tensors(), context[None, :], self.norm).data[0]
        return out[:horizon].copy()

    def tensors(self):
        return {k: ad.Tensor(v) for k, v in self.params.items()}

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "normalization": {"mean": self.norm.mean, "std": self.norm.std},
            "seed": self.seed,
            "train_config": self.train_config,
            "val_smape": self.val_smape,
            "params": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
                       for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedModel":
        params = {k: np.array(v["data"], dtype=float).reshape(v["shape"])
                  for k, v in data["params"].items()}
        norm = Normalization(**data["normalization"])
        return cls(config_from_dict(data["config"]), params, norm, data["seed"],
                   data.get("train_config", {}), data.get("val_smape", float("nan")))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_model(config, train_values, val_values, tc: TrainConfig,
              report=None) -> TrainedModel:
    """Window the train/validation segments and train one configuration.

    Normalization statistics come from ``train_values`` only unless
    ``tc.normalization`` is set. Validation windows take their context from
    the end of the training segment.
    """
    train_values = np.asarray(train_values, dtype=float).reshape(-1)
    val_values = np.asarray(val_values, dtype=float).reshape(-1)
    norm = tc.normalization or Normalization.fit(train_values)
    train_w = window_dataset(train_values, config.input_len, config.horizon, norm)
    joined = np.concatenate([train_values, val_values])
    val_w = window_dataset(joined, config.input_len, config.horizon, norm,
                           first_target=train_values.size)
    result = train(config, train_w, val_w, tc, report=report)
    tc_dict = {"learning_rate": tc.learning_rate, "batch_size": tc.batch_size,
               "max_epochs": tc.max_epochs, "early_stop_patience": tc.early_stop_patience,
               "best_epoch": result.best_epoch}
    return TrainedModel(config, copy.deepcopy(result.params), norm, tc.seed, tc_dict,
                        result.best_val)
