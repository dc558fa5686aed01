"""Naive reference forecasters: repeat the last value, or repeat yesterday."""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientDataError
from .base import Forecaster, as_array, check_horizon


def last_observation_forecast(history, h: int) -> np.ndarray:
    history = as_array(history)
    h = check_horizon(h)
    if history.size == 0:
        raise InsufficientDataError("empty history")
    return np.full(h, history[-1])


def last_day_forecast(history, h: int, period: int) -> np.ndarray:
    """Value observed one seasonal period (24 h) before each target step.

    For ``h > period`` the same day-old window is repeated.
    """
    history = as_array(history)
    h = check_horizon(h)
    if history.size < period:
        raise InsufficientDataError(
            f"history of {history.size} points is shorter than one period ({period})"
        )
    window = history[history.size - period:]
    return window[np.arange(h) % period].copy()


class _TailForecaster(Forecaster):
    keep = 1

    def __init__(self):
        super().__init__()
        self._tail = np.empty(0)

    def fit(self, train, val=None):
        values = as_array(train)
        if val is not None:
            values = np.concatenate([values, as_array(val)])
        if values.size < self.keep:
            raise InsufficientDataError(f"{self.method} needs at least {self.keep} points")
        self._tail = values[-self.keep:].copy()
        self._fitted = True
        return self

    def update(self, new_obs):
        self._check_fitted()
        new_obs = as_array(new_obs)
        if new_obs.size:
            self._tail = np.concatenate([self._tail, new_obs])[-self.keep:]
        return self


class LastObservation(_TailForecaster):
    method = "last_obs"

    def predict(self, h):
        self._check_fitted()
        return last_observation_forecast(self._tail, h)


class LastDay(_TailForecaster):
    method = "last_day"

    def __init__(self, period: int):
        super().__init__()
        self.period = int(period)
        self.keep = self.period

    def predict(self, h):
        self._check_fitted()
        return last_day_forecast(self._tail, h, self.period)

    def to_dict(self):
        return {"method": self.method, "period": self.period}
