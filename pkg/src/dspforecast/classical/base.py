from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..errors import NotFittedError


class Forecaster(ABC):
    """Common contract for every forecasting method.

    ``fit`` learns from the training history, ``update`` appends newly
    revealed observations so later predictions condition on them, and
    ``predict(h)`` returns exactly ``h`` finite values.
    """

    method: str = "abstract"

    def __init__(self):
        self._fitted = False

    @property
    def fitted(self) -> bool:
        return self._fitted

    def _check_fitted(self):
        if not self._fitted:
            raise NotFittedError(f"{self.method}: predict/update called before fit")

    @abstractmethod
    def fit(self, train, val=None) -> "Forecaster":
        ...

    @abstractmethod
    def update(self, new_obs) -> "Forecaster":
        ...

    @abstractmethod
    def predict(self, h: int) -> np.ndarray:
        ...

    def to_dict(self) -> dict:
        return {"method": self.method}


def as_array(values) -> np.ndarray:
    if hasattr(values, "values") and not isinstance(values, np.ndarray):
        values = values.values
    return np.asarray(values, dtype=float).reshape(-1)


def check_horizon(h: int) -> int:
    if int(h) != h or h <= 0:
        raise ValueError(f"horizon must be a positive integer, got {h}")
    return int(h)


def gaussian_loglik(residuals: np.ndarray) -> float:
    """Concentrated Gaussian log-likelihood with ``sigma^2 = SSE / n``."""
    n = residuals.size
    sigma2 = float(np.dot(residuals, residuals)) / n
    if sigma2 <= 0:
        return float("inf")
    return -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0)


def aic(loglik: float, k: int) -> float:
    return float(2.0 * k - 2.0 * loglik)
