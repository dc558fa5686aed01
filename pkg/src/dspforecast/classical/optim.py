"""Bounded Nelder-Mead with one restart, over the compiled objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    nfev: int


def nelder_mead(kind: int, x0, data=None, iparams=(), bounds=None, step=0.1,
                max_evals_per_dim=500, xatol=1e-6, fatol=1e-10) -> SimplexResult:
    """Minimise objective ``kind`` from :mod:`._kernels` inside ``bounds``.

    Runs the simplex search, then restarts once from the optimum with a
    simplex a quarter of the size. Each run may use up to
    ``max_evals_per_dim * dim`` evaluations; ``converged`` reports whether
    the restart met both tolerances.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    if bounds is None:
        lo = np.full(dim, -np.inf)
        hi = np.full(dim, np.inf)
    else:
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
    data = np.zeros(0) if data is None else np.ascontiguousarray(data, dtype=float)
    iparams = np.asarray(iparams, dtype=np.int64)
    maxfev = int(max_evals_per_dim * dim)
    x1, f1, _, n1 = _kernels.nelder_mead(kind, data, iparams, x0, lo, hi, float(step), maxfev,
                                         float(xatol), float(fatol))
    x2, f2, ok2, n2 = _kernels.nelder_mead(kind, data, iparams, x1, lo, hi, float(step) / 4.0,
                                           maxfev, float(xatol), float(fatol))
    if f1 < f2:
        x2, f2 = x1, f1
    return SimplexResult(np.asarray(x2, dtype=float), float(f2), bool(ok2), int(n1 + n2))
