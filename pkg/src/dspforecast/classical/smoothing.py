"""Single and triple (Holt-Winters) exponential smoothing.

Smoothing factors are selected by AIC computed from one-step in-sample
residuals. SES counts 2 parameters (alpha and the initial level); TES counts
the 3 smoothing factors plus initial level, trend and one seasonal state per
season slot.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from ..errors import FitFailedError, InsufficientDataError
from .base import Forecaster, aic, as_array, check_horizon, gaussian_loglik
from . import _kernels
from .optim import nelder_mead

log = logging.getLogger(__name__)

SES_ALPHA_GRID = tuple(round(0.01 + 0.02 * i, 2) for i in range(50))
TES_ALPHA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
TES_BETA_GRID = (0.0, 0.01, 0.1, 0.3)
TES_GAMMA_GRID = (0.0, 0.05, 0.2, 0.5, 0.8)
SEASONALITY_MODES = ("additive", "multiplicative")


@dataclass(frozen=True)
class SESState:
    alpha: float
    level: float
    aic: float
    n_obs: int
    degenerate: bool = False

    def forecast(self, h: int) -> np.ndarray:
        return np.full(check_horizon(h), self.level)

    def update(self, new_obs) -> "SESState":
        new_obs = as_array(new_obs)
        if new_obs.size == 0:
            return self
        level = self.level
        for y in new_obs:
            level = self.alpha * y + (1.0 - self.alpha) * level
        return replace(self, level=float(level), n_obs=self.n_obs + new_obs.size)

    def to_dict(self):
        return {"method": "ses", "alpha": self.alpha, "level": self.level, "aic": self.aic,
                "degenerate": self.degenerate}


def ses_filter(y: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """One-step residuals and final level, level initialised to ``y[0]``."""
    y = as_array(y)
    if y.size == 1:
        return np.empty(0), float(y[0])
    decay = 1.0 - alpha
    levels = lfilter([alpha], [1.0, -decay], y[1:], zi=[decay * y[0]])[0]
    previous = np.concatenate([[y[0]], levels[:-1]])
    return y[1:] - previous, float(levels[-1])


def filter_ses(y, alpha: float) -> SESState:
    y = as_array(y)
    residuals, level = ses_filter(y, alpha)
    value = aic(gaussian_loglik(residuals), 2) if residuals.size else float("nan")
    return SESState(float(alpha), level, value, y.size)


def fit_ses(train, alphas=SES_ALPHA_GRID) -> SESState:
    """Pick the AIC-minimising alpha from ``alphas``; ties keep the first."""
    y = as_array(train)
    if y.size < 3:
        raise InsufficientDataError("SES needs at least 3 observations")
    if np.ptp(y) == 0:
        log.warning("constant series: SES alpha set to 0")
        return SESState(0.0, float(y[0]), float("nan"), y.size, degenerate=True)
    best = None
    for alpha in alphas:
        state = filter_ses(y, alpha)
        if best is None or state.aic < best.aic:
            best = state
    return best


@dataclass(frozen=True, eq=False)
class TESState:
    alpha: float
    beta: float
    gamma: float
    mode: str
    period: int
    level: float
    trend: float
    # seasonal[0] belongs to the next unseen observation
    seasonal: np.ndarray = field(repr=False)
    aic: float
    n_obs: int

    def forecast(self, h: int) -> np.ndarray:
        h = check_horizon(h)
        steps = np.arange(1, h + 1)
        season = self.seasonal[(steps - 1) % self.period]
        base = self.level + steps * self.trend
        out = base + season if self.mode == "additive" else base * season
        return out

    def update(self, new_obs) -> "TESState":
        new_obs = as_array(new_obs)
        if new_obs.size == 0:
            return self
        _, level, trend, seasonal = _tes_recursion(
            new_obs, self.alpha, self.beta, self.gamma, self.mode == "multiplicative",
            self.level, self.trend, self.seasonal.copy(),
        )
        return replace(self, level=level, trend=trend, seasonal=seasonal,
                       n_obs=self.n_obs + new_obs.size)

    def to_dict(self):
        return {"method": "tes", "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
                "mode": self.mode, "period": self.period, "aic": self.aic}


def tes_initial_states(y: np.ndarray, period: int, mode: str):
    """Level, trend and seasonal indices from the first two seasons."""
    if y.size < 2 * period:
        raise InsufficientDataError(f"TES needs at least two seasons ({2 * period} points)")
    first = y[:period]
    second = y[period:2 * period]
    level = first.mean()
    trend = (second.mean() - first.mean()) / period
    if mode == "additive":
        seasonal = first - level
    else:
        seasonal = first / level
    return float(level), float(trend), np.array(seasonal, dtype=float)


def _tes_recursion(y, alpha, beta, gamma, multiplicative, level, trend, seasonal):
    """Holt-Winters updates over ``y``; the returned seasonal array is rotated so
    that index 0 is the slot of the next observation."""
    s = np.array(seasonal, dtype=float)
    residuals, level, trend = _kernels.holt_winters(
        np.ascontiguousarray(y, dtype=float), float(alpha), float(beta), float(gamma),
        bool(multiplicative), float(level), float(trend), s)
    return residuals, float(level), float(trend), np.roll(s, -(y.size % s.size))


def filter_tes(y, period: int, alpha: float, beta: float, gamma: float,
               mode: str = "additive") -> TESState:
    y = as_array(y)
    if mode == "multiplicative" and np.any(y <= 0):
        raise FitFailedError("multiplicative seasonality requires strictly positive data")
    level, trend, seasonal = tes_initial_states(y, period, mode)
    with np.errstate(all="ignore"):
        residuals, level, trend, seasonal = _tes_recursion(
            y, alpha, beta, gamma, mode == "multiplicative", level, trend, seasonal)
    if not (np.all(np.isfinite(residuals)) and np.isfinite(level) and np.isfinite(trend)
            and np.all(np.isfinite(seasonal))):
        raise FitFailedError("Holt-Winters recursion diverged")
    value = aic(gaussian_loglik(residuals), 3 + 2 + period)
    return TESState(float(alpha), float(beta), float(gamma), mode, int(period), level, trend,
                    seasonal, value, y.size)


def fit_tes(train, period: int, alphas=TES_ALPHA_GRID, betas=TES_BETA_GRID,
            gammas=TES_GAMMA_GRID, modes=SEASONALITY_MODES, refine: bool = True) -> TESState:
    """Grid search over smoothing factors and seasonality mode by AIC.

    With ``refine`` the best grid point of each mode is polished by a bounded
    simplex search over ``[0, 1]^3``.
    """
    y = as_array(train)
    if period < 2:
        raise ValueError("TES period must be >= 2")
    if y.size < 2 * period:
        raise InsufficientDataError(f"TES needs at least {2 * period} observations")
    modes = [m for m in modes if m == "additive" or np.all(y > 0)]
    best_per_mode = {}
    for mode, alpha, beta, gamma in itertools.product(modes, alphas, betas, gammas):
        try:
            state = filter_tes(y, period, alpha, beta, gamma, mode)
        except FitFailedError:
            continue
        current = best_per_mode.get(mode)
        if current is None or state.aic < current.aic:
            best_per_mode[mode] = state
    if refine:
        for mode, start in list(best_per_mode.items()):
            polished = _refine_tes(y, period, mode, start)
            if polished.aic < start.aic:
                best_per_mode[mode] = polished
    if not best_per_mode:
        raise FitFailedError("no Holt-Winters configuration could be fitted")
    return min(best_per_mode.values(), key=lambda s: s.aic)


def _refine_tes(y, period, mode, start: TESState) -> TESState:
    level, trend, seasonal = tes_initial_states(y, period, mode)
    data = np.concatenate([[level, trend], seasonal, y])
    with np.errstate(all="ignore"):
        res = nelder_mead(_kernels.HOLT_WINTERS, [start.alpha, start.beta, start.gamma],
                          data=data, iparams=(period, int(mode == "multiplicative")),
                          bounds=[(0.0, 1.0)] * 3, step=0.05, max_evals_per_dim=100,
                          xatol=1e-4, fatol=1e-6)
    try:
        return filter_tes(y, period, *np.clip(res.x, 0.0, 1.0), mode)
    except FitFailedError:
        return start


class SES(Forecaster):
    method = "ses"

    def __init__(self, alphas=SES_ALPHA_GRID, refit_every: int | None = None):
        super().__init__()
        self.alphas = tuple(alphas)
        self.refit_every = refit_every
        self.state: SESState | None = None
        self._history = None
        self._since_refit = 0

    def fit(self, train, val=None):
        y = as_array(train)
        if val is not None:
            y = np.concatenate([y, as_array(val)])
        self.state = fit_ses(y, self.alphas)
        self._history = y if self.refit_every else None
        self._fitted = True
        return self

    def update(self, new_obs):
        self._check_fitted()
        new_obs = as_array(new_obs)
        self.state = self.state.update(new_obs)
        if self.refit_every and new_obs.size:
            self._history = np.concatenate([self._history, new_obs])
            self._since_refit += 1
            if self._since_refit >= self.refit_every:
                self.state = fit_ses(self._history, self.alphas)
                self._since_refit = 0
        return self

    def predict(self, h):
        self._check_fitted()
        return self.state.forecast(h)

    def to_dict(self):
        return self.state.to_dict() if self.state else {"method": self.method}


class TES(Forecaster):
    method = "tes"

    def __init__(self, period: int, alphas=TES_ALPHA_GRID, betas=TES_BETA_GRID,
                 gammas=TES_GAMMA_GRID, modes=SEASONALITY_MODES, refine: bool = True,
                 refit_every: int | None = None):
        super().__init__()
        self.period = int(period)
        self.grid = dict(alphas=tuple(alphas), betas=tuple(betas), gammas=tuple(gammas),
                         modes=tuple(modes), refine=refine)
        self.refit_every = refit_every
        self.state: TESState | None = None
        self._history = None
        self._since_refit = 0

    def fit(self, train, val=None):
        y = as_array(train)
        if val is not None:
            y = np.concatenate([y, as_array(val)])
        self.state = fit_tes(y, self.period, **self.grid)
        self._history = y if self.refit_every else None
        self._fitted = True
        return self

    def update(self, new_obs):
        self._check_fitted()
        new_obs = as_array(new_obs)
        self.state = self.state.update(new_obs)
        if self.refit_every and new_obs.size:
            self._history = np.concatenate([self._history, new_obs])
            self._since_refit += 1
            if self._since_refit >= self.refit_every:
                self.state = fit_tes(self._history, self.period, **self.grid)
                self._since_refit = 0
        return self

    def predict(self, h):
        self._check_fitted()
        return self.state.forecast(h)

    def to_dict(self):
        return self.state.to_dict() if self.state else {"method": self.method}
