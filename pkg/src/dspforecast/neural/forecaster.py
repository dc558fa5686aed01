"""Forecaster wrappers for the trained networks."""

from __future__ import annotations

import numpy as np

from ..classical.base import Forecaster, as_array, check_horizon
from ..errors import InsufficientDataError
from .train import TrainConfig, TrainedModel, fit_model


class NeuralForecaster(Forecaster):
    """GRU or CNN behind the common forecaster contract.

    ``fit`` either trains the given ``config`` or, when ``config`` is None,
    runs the random search from :mod:`dspforecast.hyperopt`. Weights are
    frozen after fitting; ``update`` only extends the context window.
    """

    def __init__(self, arch: str, horizon: int, period: int, config=None,
                 train_config: TrainConfig | None = None, space=None, budget=None,
                 settings=None, seed: int = 0, trace_path=None):
        super().__init__()
        if arch not in ("gru", "cnn"):
            raise ValueError(f"unknown architecture {arch!r}")
        self.method = arch
        self.horizon = int(horizon)
        self.period = int(period)
        self.config = config
        self.train_config = train_config or TrainConfig(seed=seed)
        self.space = space
        self.budget = budget
        self.settings = settings
        self.seed = seed
        self.trace_path = trace_path
        self.model: TrainedModel | None = None
        self.trials = []
        self._context = np.empty(0)

    def fit(self, train, val=None):
        train = as_array(train)
        if val is None:
            raise InsufficientDataError("neural forecasters need a validation segment")
        val = as_array(val)
        if self.config is not None:
            self.model = fit_model(self.config, train, val, self.train_config)
        else:
            from ..hyperopt import search_neural
            result = search_neural(self.method, train, val, self.horizon, self.period,
                                   space=self.space, budget=self.budget, seed=self.seed,
                                   settings=self.settings, trace_path=self.trace_path)
            self.model = result.model
            self.trials = result.trials
        self._context = np.concatenate([train, val])[-self.model.config.input_len:]
        self._fitted = True
        return self

    @classmethod
    def from_model(cls, model: TrainedModel, period: int, history) -> "NeuralForecaster":
        """Wrap an already trained (e.g. reloaded) model for prediction only."""
        out = cls(model.config.arch, model.config.horizon, period, config=model.config)
        out.model = model
        history = as_array(history)
        if history.size < model.config.input_len:
            raise InsufficientDataError(f"need {model.config.input_len} context observations")
        out._context = history[-model.config.input_len:].copy()
        out._fitted = True
        return out

    def update(self, new_obs):
        self._check_fitted()
        new_obs = as_array(new_obs)
        if new_obs.size:
            keep = self.model.config.input_len
            self._context = np.concatenate([self._context, new_obs])[-keep:]
        return self

    def predict(self, h):
        self._check_fitted()
        return self.model.predict(self._context, check_horizon(h))

    def to_dict(self):
        if self.model is None:
            return {"method": self.method}
        return {"method": self.method, "config": self.model.config.to_dict(),
                "val_smape": self.model.val_smape, "seed": self.model.seed,
                "train_config": self.model.train_config}
