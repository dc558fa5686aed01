"""numba kernels: likelihood recursions and the simplex search that drives them.

Objectives are selected by an integer so that every compiled function has
plain array/scalar arguments and can be cached on disk.
"""

import numba
import numpy as np

ROSENBROCK = 0
CSS = 1
HOLT_WINTERS = 2

PENALTY = 1e100


@numba.njit(cache=True)
def clip(v, lo, hi):
    for i in range(v.size):
        if v[i] < lo[i]:
            v[i] = lo[i]
        elif v[i] > hi[i]:
            v[i] = hi[i]
    return v


@numba.njit(cache=True)
def stable(coeffs):
    """Levinson step-down test that ``1 - sum(c_i z^i)`` has no roots in the unit disc."""
    a = coeffs.copy()
    n = a.size
    while n > 0 and a[n - 1] == 0.0:
        n -= 1
    while n > 0:
        k = a[n - 1]
        if not abs(k) < 1.0:
            return False
        denom = 1.0 - k * k
        b = np.empty(n - 1)
        for i in range(n - 1):
            b[i] = (a[i] + k * a[n - 2 - i]) / denom
        a = b
        n -= 1
    return True


@numba.njit(cache=True)
def sparse_product(first, second, lag, sign):
    """Nonzero lags/coefficients of ``(1 + sign*sum f_i B^i)(1 + sign*sum s_j B^(j*lag))``."""
    size = (first.size + 1) * (second.size + 1)
    lags = np.empty(size, dtype=np.int64)
    coefs = np.empty(size)
    k = 0
    for i1 in range(first.size + 1):
        a1 = 1.0 if i1 == 0 else sign * first[i1 - 1]
        for i2 in range(second.size + 1):
            a2 = 1.0 if i2 == 0 else sign * second[i2 - 1]
            if a1 * a2 != 0.0:
                lags[k] = i1 + i2 * lag
                coefs[k] = a1 * a2
                k += 1
    return lags[:k], coefs[:k]


@numba.njit(cache=True)
def css_objective(x, z, iparams):
    """Mean squared CSS residual of an ARMA model on a pre-differenced series.

    ``iparams = (p, q, P, Q, m, skip)``; ``x = (c, ar..., ma..., sar..., sma...)``.
    """
    p, q, P, Q, m, skip = iparams[0], iparams[1], iparams[2], iparams[3], iparams[4], iparams[5]
    c = x[0]
    ar = x[1:1 + p]
    ma = x[1 + p:1 + p + q]
    sar = x[1 + p + q:1 + p + q + P]
    sma = x[1 + p + q + P:1 + p + q + P + Q]
    if not (stable(ar) and stable(sar) and stable(-ma) and stable(-sma)):
        return PENALTY
    ar_lags, ar_coefs = sparse_product(ar, sar, m, -1.0)
    ma_lags, ma_coefs = sparse_product(ma, sma, m, 1.0)
    start = p + P * m
    n = z.size
    e = np.zeros(n - start)
    total = 0.0
    count = 0
    for t in range(start, n):
        v = -c
        for k in range(ar_lags.size):
            v += ar_coefs[k] * z[t - ar_lags[k]]
        j = t - start
        for k in range(1, ma_lags.size):
            if j - ma_lags[k] >= 0:
                v -= ma_coefs[k] * e[j - ma_lags[k]]
        e[j] = v
        if j >= skip:
            total += v * v
            count += 1
    value = total / count
    if not np.isfinite(value):
        return PENALTY
    return value


@numba.njit(cache=True)
def holt_winters(y, alpha, beta, gamma, multiplicative, level, trend, seasonal):
    """Holt-Winters recursion; ``seasonal`` is updated in place, index ``t % m``.

    Returns the one-step residuals and the final level and trend.
    """
    m = seasonal.size
    residuals = np.empty(y.size)
    a1 = 1.0 - alpha
    b1 = 1.0 - beta
    g1 = 1.0 - gamma
    for t in range(y.size):
        obs = y[t]
        j = t % m
        season = seasonal[j]
        if multiplicative:
            residuals[t] = obs - (level + trend) * season
            new_level = alpha * obs / season + a1 * (level + trend)
            trend = beta * (new_level - level) + b1 * trend
            seasonal[j] = gamma * obs / new_level + g1 * season
        else:
            residuals[t] = obs - (level + trend + season)
            new_level = alpha * (obs - season) + a1 * (level + trend)
            trend = beta * (new_level - level) + b1 * trend
            seasonal[j] = gamma * (obs - new_level) + g1 * season
        level = new_level
    return residuals, level, trend


@numba.njit(cache=True)
def holt_winters_objective(x, data, iparams):
    """-2 log-likelihood (concentrated) of Holt-Winters one-step residuals.

    ``data = (level0, trend0, seasonal0..., y...)``; ``iparams = (period, multiplicative)``.
    """
    m = iparams[0]
    seasonal = data[2:2 + m].copy()
    y = data[2 + m:]
    residuals, level, trend = holt_winters(y, x[0], x[1], x[2], iparams[1] == 1,
                                           data[0], data[1], seasonal)
    sse = 0.0
    for r in residuals:
        sse += r * r
    n = y.size
    if not np.isfinite(sse) or sse <= 0.0:
        return PENALTY
    return n * (np.log(2.0 * np.pi * sse / n) + 1.0)


@numba.njit(cache=True)
def evaluate(kind, x, data, iparams):
    if kind == CSS:
        return css_objective(x, data, iparams)
    if kind == HOLT_WINTERS:
        return holt_winters_objective(x, data, iparams)
    total = 0.0
    for i in range(x.size - 1):
        total += 100.0 * (x[i + 1] - x[i] ** 2) ** 2 + (1.0 - x[i]) ** 2
    return total


@numba.njit(cache=True)
def nelder_mead(kind, data, iparams, x0, lo, hi, step, maxfev, xatol, fatol):
    """Bounded simplex search with adaptive (Gao-Han) coefficients.

    Trial points are projected onto the box. Stops when both the simplex
    diameter and the spread of objective values fall under the tolerances,
    or after ``maxfev`` evaluations.
    """
    n = x0.size
    rho = 1.0
    chi = 1.0 + 2.0 / n
    psi = 0.75 - 1.0 / (2.0 * n)
    sigma = 1.0 - 1.0 / n
    sim = np.empty((n + 1, n))
    fs = np.empty(n + 1)
    sim[0] = clip(x0.copy(), lo, hi)
    for i in range(n):
        v = sim[0].copy()
        v[i] += step
        if v[i] > hi[i]:
            v[i] = sim[0, i] - step
        sim[i + 1] = clip(v, lo, hi)
    for i in range(n + 1):
        fs[i] = evaluate(kind, sim[i], data, iparams)
    nfev = n + 1
    converged = False
    xbar = np.empty(n)
    while nfev < maxfev:
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        spread_x = 0.0
        spread_f = 0.0
        for j in range(1, n + 1):
            spread_f = max(spread_f, abs(fs[j] - fs[0]))
            for i in range(n):
                spread_x = max(spread_x, abs(sim[j, i] - sim[0, i]))
        if spread_x <= xatol and spread_f <= fatol:
            converged = True
            break
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += sim[j, i]
            xbar[i] = acc / n
        worst = sim[n].copy()
        xr = clip(xbar + rho * (xbar - worst), lo, hi)
        fr = evaluate(kind, xr, data, iparams)
        nfev += 1
        shrink = False
        if fr < fs[0]:
            xe = clip(xbar + rho * chi * (xbar - worst), lo, hi)
            fe = evaluate(kind, xe, data, iparams)
            nfev += 1
            if fe < fr:
                sim[n] = xe
                fs[n] = fe
            else:
                sim[n] = xr
                fs[n] = fr
        elif fr < fs[n - 1]:
            sim[n] = xr
            fs[n] = fr
        elif fr < fs[n]:
            xc = clip(xbar + psi * rho * (xbar - worst), lo, hi)
            fc = evaluate(kind, xc, data, iparams)
            nfev += 1
            if fc <= fr:
                sim[n] = xc
                fs[n] = fc
            else:
                shrink = True
        else:
            xcc = clip(xbar - psi * (xbar - worst), lo, hi)
            fcc = evaluate(kind, xcc, data, iparams)
            nfev += 1
            if fcc < fs[n]:
                sim[n] = xcc
                fs[n] = fcc
            else:
                shrink = True
        if shrink:
            for j in range(1, n + 1):
                sim[j] = clip(sim[0] + sigma * (sim[j] - sim[0]), lo, hi)
                fs[j] = evaluate(kind, sim[j], data, iparams)
            nfev += n
    best = np.argmin(fs)
    return sim[best].copy(), fs[best], converged, nfev
