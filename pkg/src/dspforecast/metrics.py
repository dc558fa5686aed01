"""SMAPE and RMSE forecast metrics.

SMAPE uses the bounded variant ``|Y - Yhat| / (|Y| + |Yhat|)`` with no
factor of two, so it lies in [0, 100].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ForecastEval:
    actual: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        actual = np.asarray(self.actual, dtype=float).reshape(-1)
        predicted = np.asarray(self.predicted, dtype=float).reshape(-1)
        if actual.shape != predicted.shape:
            raise ValueError(
                f"actual and predicted differ in length: {actual.size} vs {predicted.size}"
            )
        if actual.size == 0:
            raise ValueError("at least one compared point is required")
        if not (np.all(np.isfinite(actual)) and np.all(np.isfinite(predicted))):
            raise ValueError("metric inputs must be finite")
        object.__setattr__(self, "actual", actual)
        object.__setattr__(self, "predicted", predicted)

    @property
    def n(self) -> int:
        return self.actual.size


@dataclass
class SmapeDiagnostics:
    """Counts SMAPE terms where both actual and predicted were zero."""

    zero_zero_terms: int = 0


def _as_eval(actual, predicted=None) -> ForecastEval:
    if isinstance(actual, ForecastEval):
        return actual
    return ForecastEval(actual, predicted)


def smape_terms(actual, predicted=None, diagnostics: SmapeDiagnostics | None = None) -> np.ndarray:
    ev = _as_eval(actual, predicted)
    denom = np.abs(ev.actual) + np.abs(ev.predicted)
    zero = denom == 0
    if diagnostics is not None:
        diagnostics.zero_zero_terms += int(zero.sum())
    safe = np.where(zero, 1.0, denom)
    return np.where(zero, 0.0, np.abs(ev.actual - ev.predicted) / safe)


def smape(actual, predicted=None, diagnostics: SmapeDiagnostics | None = None) -> float:
    """Symmetric mean absolute percentage error in percent.

    Accepts either a :class:`ForecastEval` or two sequences. A term with
    ``Y = Yhat = 0`` contributes 0 and is counted in ``diagnostics``.
    """
    terms = smape_terms(actual, predicted, diagnostics)
    return float(100.0 * terms.mean())


def rmse(actual, predicted=None) -> float:
    ev = _as_eval(actual, predicted)
    return float(np.sqrt(np.mean((ev.actual - ev.predicted) ** 2)))


def smape_gradient(actual, predicted) -> np.ndarray:
    """Gradient of :func:`smape` with respect to each predicted value.

    Subgradients at kinks (``Yhat == Y`` or ``Yhat == 0``) are taken as 0 for
    the sign factor that is undefined there.
    """
    y = np.asarray(actual, dtype=float)
    yhat = np.asarray(predicted, dtype=float)
    n = y.size
    denom = np.abs(y) + np.abs(yhat)
    zero = denom == 0
    safe = np.where(zero, 1.0, denom)
    diff = yhat - y
    grad = np.sign(diff) / safe - np.abs(diff) * np.sign(yhat) / safe**2
    grad = np.where(zero | (diff == 0), 0.0, grad)
    return grad * (100.0 / n)
