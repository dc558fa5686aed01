"""(Seasonal) ARIMA estimated by conditional sum of squares.

The model for the differenced series ``w = (1-B)^d (1-B^m)^D y`` is

    phi(B) Phi(B^m) w_t = c + theta(B) Theta(B^m) e_t

Pre-sample residuals are zero and the first ``d + D*m + p + P*m``
observations are conditioned on. Expanding every factor into one AR
polynomial ``a(B)`` acting on ``y`` and one MA polynomial ``b(B)`` lets
filtering, updating and forecasting run directly on the undifferenced
series.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from ..errors import FitFailedError, InfeasibleOrderError, InsufficientDataError
from .base import Forecaster, aic, as_array, check_horizon, gaussian_loglik
from . import _kernels
from .optim import nelder_mead


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError("ARIMA orders must be non-negative")
        if self.d not in (0, 1):
            raise ValueError("d must be 0 or 1")


@dataclass(frozen=True)
class SarimaOrder:
    base: ArimaOrder
    P: int = 0
    D: int = 0
    Q: int = 0
    m: int = 0

    def __post_init__(self):
        if min(self.P, self.D, self.Q) < 0:
            raise ValueError("seasonal orders must be non-negative")
        if self.D not in (0, 1):
            raise ValueError("D must be 0 or 1")
        if (self.P or self.D or self.Q) and self.m < 2:
            raise ValueError("seasonal terms need a period m >= 2")

    @property
    def seasonal(self) -> bool:
        return bool(self.P or self.D or self.Q)

    @property
    def total_order(self) -> int:
        return self.base.p + self.base.q + self.P + self.Q

    def n_conditioning(self) -> int:
        m = self.m if self.seasonal else 0
        return self.base.d + self.D * m + self.base.p + self.P * m

    def label(self) -> str:
        b = self.base
        if not self.seasonal:
            return f"({b.p},{b.d},{b.q})"
        return f"({b.p},{b.d},{b.q})x({self.P},{self.D},{self.Q})_{self.m}"


def as_sarima(order) -> SarimaOrder:
    if isinstance(order, SarimaOrder):
        return order
    if isinstance(order, ArimaOrder):
        return SarimaOrder(order)
    return SarimaOrder(ArimaOrder(*order))


def is_stationary(coeffs) -> bool:
    """True when ``1 - sum(c_i z^i)`` has every root outside the unit circle.

    Uses the Levinson step-down recursion: the polynomial is stable iff every
    reflection coefficient has modulus below one.
    """
    return bool(_kernels.stable(np.asarray(coeffs, dtype=float).reshape(-1)))


def is_invertible(coeffs) -> bool:
    """True when ``1 + sum(c_i z^i)`` has every root outside the unit circle."""
    return is_stationary(-np.asarray(coeffs, dtype=float))


def _lag_poly(coeffs, lag: int, sign: float) -> np.ndarray:
    """``1 + sign * sum(c_i B^(i*lag))`` as ascending coefficients."""
    poly = np.zeros(len(coeffs) * lag + 1)
    poly[0] = 1.0
    for i, c in enumerate(coeffs, start=1):
        poly[i * lag] = sign * c
    return poly


def expand_polynomials(order: SarimaOrder, ar, ma, sar, sma):
    """Full AR polynomial on ``y`` (differencing included) and MA polynomial."""
    m = order.m
    ar_poly = np.convolve(_lag_poly(ar, 1, -1.0), _lag_poly(sar, m, -1.0))
    for _ in range(order.base.d):
        ar_poly = np.convolve(ar_poly, [1.0, -1.0])
    for _ in range(order.D):
        ar_poly = np.convolve(ar_poly, _lag_poly([1.0], m, -1.0))
    ma_poly = np.convolve(_lag_poly(ma, 1, 1.0), _lag_poly(sma, m, 1.0))
    return ar_poly, ma_poly


def _residuals(y, ar_poly, ma_poly, c, start):
    """CSS residuals for ``y[start:]`` with zero pre-sample residuals."""
    x = np.convolve(y, ar_poly)[start:y.size] - c
    return lfilter([1.0], ma_poly, x)


@dataclass(frozen=True, eq=False)
class ArimaState:
    order: SarimaOrder
    intercept: float
    ar: np.ndarray
    ma: np.ndarray
    sar: np.ndarray
    sma: np.ndarray
    sigma2: float
    loglik: float
    aic: float
    n_obs: int
    ar_poly: np.ndarray = field(repr=False)
    ma_poly: np.ndarray = field(repr=False)
    y_tail: np.ndarray = field(repr=False)
    e_tail: np.ndarray = field(repr=False)

    def forecast(self, h: int) -> np.ndarray:
        h = check_horizon(h)
        a = self.ar_poly[1:]
        b = self.ma_poly[1:]
        ys = list(self.y_tail)
        es = list(self.e_tail)
        out = np.empty(h)
        for i in range(h):
            value = self.intercept
            for j, coef in enumerate(a, start=1):
                if coef:
                    value -= coef * ys[-j]
            for j, coef in enumerate(b, start=1):
                if coef:
                    value += coef * es[-j]
            out[i] = value
            ys.append(value)
            es.append(0.0)
        return out

    def update(self, new_obs) -> "ArimaState":
        new_obs = as_array(new_obs)
        if new_obs.size == 0:
            return self
        a = self.ar_poly[1:]
        b = self.ma_poly[1:]
        ys = list(self.y_tail)
        es = list(self.e_tail)
        for y in new_obs.tolist():
            expected = self.intercept
            for j, coef in enumerate(a, start=1):
                if coef:
                    expected -= coef * ys[-j]
            for j, coef in enumerate(b, start=1):
                if coef:
                    expected += coef * es[-j]
            ys.append(y)
            es.append(y - expected)
        return replace(self, y_tail=_tail(ys, a.size), e_tail=_tail(es, b.size),
                       n_obs=self.n_obs + new_obs.size)

    def to_dict(self):
        o = self.order
        return {
            "method": "sarima" if o.seasonal else "arima",
            "order": [o.base.p, o.base.d, o.base.q],
            "seasonal_order": [o.P, o.D, o.Q, o.m],
            "intercept": self.intercept,
            "ar": self.ar.tolist(), "ma": self.ma.tolist(),
            "sar": self.sar.tolist(), "sma": self.sma.tolist(),
            "sigma2": self.sigma2, "loglik": self.loglik, "aic": self.aic,
        }


def _tail(values, n):
    arr = np.asarray(values, dtype=float)
    return arr[arr.size - n:].copy() if n else np.empty(0)


def filter_arima(history, order, intercept=0.0, ar=(), ma=(), sar=(), sma=(),
                 n_cond: int | None = None) -> ArimaState:
    """Run the residual recursion over ``history`` with coefficients held fixed.

    Log-likelihood and AIC are computed over observations at index
    ``max(n_cond, own conditioning)`` onwards, so that candidates with
    different orders can be compared on the same sample.
    """
    order = as_sarima(order)
    y = as_array(history)
    ar, ma, sar, sma = (np.asarray(v, dtype=float).reshape(-1) for v in (ar, ma, sar, sma))
    if (ar.size, ma.size, sar.size, sma.size) != (order.base.p, order.base.q, order.P, order.Q):
        raise ValueError("coefficient counts do not match the order")
    start = order.n_conditioning()
    if y.size <= start:
        raise InsufficientDataError("history shorter than the conditioning window")
    ar_poly, ma_poly = expand_polynomials(order, ar, ma, sar, sma)
    e = _residuals(y, ar_poly, ma_poly, intercept, start)
    window = e[max(0, (n_cond or 0) - start):]
    if window.size < 2:
        raise InsufficientDataError("likelihood window holds fewer than 2 residuals")
    loglik = gaussian_loglik(window)
    k = order.total_order + 2
    full_e = np.concatenate([np.zeros(start), e])
    return ArimaState(
        order=order, intercept=float(intercept), ar=ar, ma=ma, sar=sar, sma=sma,
        sigma2=float(np.dot(window, window) / window.size), loglik=loglik,
        aic=aic(loglik, k), n_obs=y.size, ar_poly=ar_poly, ma_poly=ma_poly,
        y_tail=_tail(y, ar_poly.size - 1), e_tail=_tail(full_e, ma_poly.size - 1),
    )


def _difference(y, order: SarimaOrder):
    w = y
    for _ in range(order.base.d):
        w = np.diff(w)
    for _ in range(order.D):
        w = w[order.m:] - w[:-order.m]
    return w


def _lagged(w, lags, start):
    return np.column_stack([w[start - lag: w.size - lag] for lag in lags]) if lags else \
        np.empty((w.size - start, 0))


def _initial_guess(w, order: SarimaOrder):
    """Hannan-Rissanen style start: long AR for residuals, then one regression."""
    p, q, P, Q, m = order.base.p, order.base.q, order.P, order.Q, order.m
    ar_lags = list(range(1, p + 1)) + [j * m for j in range(1, P + 1)]
    ma_lags = list(range(1, q + 1)) + [j * m for j in range(1, Q + 1)]
    resid = np.zeros_like(w)
    if ma_lags:
        long_order = min(max(ar_lags + ma_lags) + 5, w.size // 3)
        if long_order >= 1 and w.size - long_order > long_order + 2:
            X = np.column_stack([np.ones(w.size - long_order),
                                 _lagged(w, list(range(1, long_order + 1)), long_order)])
            beta, *_ = np.linalg.lstsq(X, w[long_order:], rcond=None)
            resid[long_order:] = w[long_order:] - X @ beta
    start = max(ar_lags + ma_lags, default=0)
    if w.size - start < len(ar_lags) + len(ma_lags) + 3:
        return np.zeros(p), np.zeros(q), np.zeros(P), np.zeros(Q)
    X = np.column_stack([np.ones(w.size - start), _lagged(w, ar_lags, start),
                         _lagged(resid, ma_lags, start)])
    beta, *_ = np.linalg.lstsq(X, w[start:], rcond=None)
    coefs = beta[1:]
    ar0 = coefs[:p]
    sar0 = coefs[p:p + P]
    ma0 = coefs[p + P:p + P + q]
    sma0 = coefs[p + P + q:]
    # ignore unstable starting points rather than seeding the simplex outside the region
    ar0 = ar0 if is_stationary(ar0) else np.zeros(p)
    sar0 = sar0 if is_stationary(sar0) else np.zeros(P)
    ma0 = ma0 if is_invertible(ma0) else np.zeros(q)
    sma0 = sma0 if is_invertible(sma0) else np.zeros(Q)
    return ar0, ma0, sar0, sma0


def fit_sarima(train, order, n_cond: int | None = None) -> ArimaState:
    """Estimate intercept and ARMA coefficients by conditional sum of squares.

    Pure non-seasonal AR models are solved exactly by least squares; every
    other order uses a bounded Nelder-Mead search on the standardised
    differenced series. Raises :class:`FitFailedError` when the simplex does
    not converge or the optimum is non-stationary or non-invertible.
    """
    order = as_sarima(order)
    y = as_array(train)
    p, q, P, Q, m = order.base.p, order.base.q, order.P, order.Q, order.m
    if order.seasonal:
        if m * max(P, Q, order.D) >= y.size:
            raise InfeasibleOrderError(
                f"seasonal order {order.label()} exceeds {y.size} observations")
        if y.size < 3 * m:
            raise InsufficientDataError(f"SARIMA needs at least {3 * m} observations")
    if y.size <= p + q + order.base.d + 10 or y.size <= order.n_conditioning() + 2:
        raise InsufficientDataError(f"too few observations for order {order.label()}")

    w = _difference(y, order)
    mu = float(w.mean())
    scale = float(w.std()) or 1.0
    z = (w - mu) / scale
    start_w = p + P * m
    # drop residuals before the shared likelihood window
    skip = max(0, (n_cond or 0) - order.n_conditioning())
    dummy = SarimaOrder(ArimaOrder(p, 0, q), P, 0, Q, m)

    def unpack(x):
        return x[0], x[1:1 + p], x[1 + p:1 + p + q], x[1 + p + q:1 + p + q + P], x[1 + p + q + P:]

    if q == 0 and Q == 0 and P == 0:
        X = np.column_stack([np.ones(z.size - p), _lagged(z, list(range(1, p + 1)), p)])
        beta, *_ = np.linalg.lstsq(X[skip:], z[p + skip:], rcond=None)
        x_best = beta
        if not is_stationary(beta[1:]):
            raise FitFailedError(f"least-squares AR fit for {order.label()} is non-stationary")
    else:
        ar0, ma0, sar0, sma0 = _initial_guess(z, order)
        x0 = np.concatenate([[0.0], ar0, ma0, sar0, sma0])
        x0[0] = float(np.mean(np.convolve(z, expand_polynomials(dummy, ar0, ma0, sar0, sma0)[0])
                              [start_w:z.size]))
        bounds = [(-10.0, 10.0)] + [(-0.999, 0.999)] * (x0.size - 1)
        if x0.size > 1 and np.any(np.abs(x0[1:]) >= 0.999):
            x0[1:] = np.clip(x0[1:], -0.99, 0.99)
        result = nelder_mead(_kernels.CSS, x0, data=z, iparams=(p, q, P, Q, m, skip),
                             bounds=bounds, step=0.1, xatol=1e-4, fatol=1e-8)
        if not result.converged:
            raise FitFailedError(f"simplex search did not converge for {order.label()}")
        if result.fun >= _kernels.PENALTY:
            raise FitFailedError(f"no admissible coefficients for {order.label()}")
        x_best = result.x

    c_z, ar, ma, sar, sma = unpack(np.asarray(x_best, dtype=float))
    ar_poly_w, _ = expand_polynomials(dummy, ar, ma, sar, sma)
    intercept = scale * c_z + mu * float(ar_poly_w.sum())
    if not (is_stationary(ar) and is_stationary(sar) and is_invertible(ma) and is_invertible(sma)):
        raise FitFailedError(f"optimum for {order.label()} is non-stationary or non-invertible")
    return filter_arima(y, order, intercept, ar, ma, sar, sma, n_cond=n_cond)


def fit_arima(train, order, n_cond: int | None = None) -> ArimaState:
    order = as_sarima(order)
    if order.seasonal:
        raise ValueError("use fit_sarima for seasonal orders")
    return fit_sarima(train, order, n_cond=n_cond)


class Arima(Forecaster):
    """Forecaster wrapper around a fixed or AIC-selected (seasonal) ARIMA order.

    With ``order=None`` the order is chosen by :func:`dspforecast.hyperopt.search_classical`
    using ``space``.
    """

    method = "arima"

    def __init__(self, order=None, space=None, refit_every: int | None = None):
        super().__init__()
        self.order = None if order is None else as_sarima(order)
        self.space = space
        self.refit_every = refit_every
        self.state: ArimaState | None = None
        self._history = None
        self._since_refit = 0

    def _fit_order(self, y):
        if self.order is not None:
            return fit_sarima(y, self.order)
        from ..hyperopt import search_classical
        return search_classical(self.method, y, self.space)

    def fit(self, train, val=None):
        y = as_array(train)
        if val is not None:
            y = np.concatenate([y, as_array(val)])
        self.state = self._fit_order(y)
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
                try:
                    self.state = fit_sarima(self._history, self.state.order)
                except (FitFailedError, InsufficientDataError):
                    pass
                self._since_refit = 0
        return self

    def predict(self, h):
        self._check_fitted()
        return self.state.forecast(h)

    def to_dict(self):
        return self.state.to_dict() if self.state else {"method": self.method}


class Sarima(Arima):
    method = "sarima"
