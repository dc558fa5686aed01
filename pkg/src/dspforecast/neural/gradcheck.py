"""Central finite-difference check of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


@dataclass
class GradCheck:
    max_rel_error: float
    worst_param: str
    n_checked: int
    passed: bool


def check_gradients(loss_fn, params: dict, eps: float = 1e-6, rtol: float = 1e-4,
                    atol: float = 1e-6, max_entries: int | None = None, rng=None) -> GradCheck:
    """Compare ``backward`` against central differences of ``loss_fn(params)``.

    An entry passes when ``|analytic - numeric| <= max(rtol * max(|analytic|,
    |numeric|), atol)``. ``max_entries`` limits the checked entries per
    parameter to a random subset drawn from ``rng``. ``max_rel_error`` is
    taken over entries large enough for the relative bound to apply.
    """
    for p in params.values():
        p.zero_grad()
    loss = loss_fn(params)
    ad.backward(loss)
    analytic = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for k, p in params.items()}
    worst, worst_name, count, ok = 0.0, "", 0, True
    rng = rng or np.random.default_rng(0)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, max_entries, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            up = float(loss_fn(params).data)
            flat[i] = orig - eps
            down = float(loss_fn(params).data)
            flat[i] = orig
            numeric = (up - down) / (2 * eps)
            a = analytic[name].reshape(-1)[i]
            err = abs(a - numeric)
            scale = max(abs(a), abs(numeric))
            rel = err / scale if scale > 0 else 0.0
            if err > max(rtol * scale, atol):
                ok = False
            if rtol * scale >= atol and rel > worst:
                worst, worst_name = rel, name
            count += 1
    return GradCheck(float(worst), worst_name, count, ok)


def random_config(arch: str, rng: np.random.Generator):
    """A small random GRU or CNN configuration for gradient checks."""
    from .models import CNNConfig, GRUConfig
    horizon = int(rng.integers(1, 4))
    dropout = float(rng.choice([0.0, 0.25]))
    if arch == "gru":
        return GRUConfig(input_len=int(rng.integers(max(horizon, 2), 6)),
                         hidden_size=int(rng.integers(1, 5)),
                         num_layers=int(rng.integers(1, 3)), dropout_rate=dropout,
                         horizon=horizon)
    layers = int(rng.integers(1, 3))
    kernel = int(rng.choice([3, 5]))
    return CNNConfig(input_len=int(rng.integers(1 + layers * (kernel - 1), 10)),
                     channels=tuple(int(c) for c in rng.integers(1, 4, size=layers)),
                     kernel_size=kernel, dropout_rate=dropout, horizon=horizon)


def check_model(config, rng: np.random.Generator, loss: str = "smape", batch: int = 3,
                **kwargs) -> GradCheck:
    """Gradient check of a randomly initialised network on random windows.

    Dropout runs in training mode with a mask that is re-drawn from the same
    seed on every evaluation, so the loss is a deterministic function of the
    parameters. SMAPE targets are placed far from the predictions to stay
    clear of the loss kinks.
    """
    from .models import Normalization, forward, init_params
    params = init_params(config, rng)
    norm = Normalization(float(rng.uniform(50, 150)), float(rng.uniform(5, 20)))
    x = rng.normal(size=(batch, config.input_len))
    sign = rng.choice([-1.0, 1.0], size=(batch, config.horizon))
    targets = norm.mean + sign * norm.std * rng.uniform(3, 6, size=(batch, config.horizon))
    mask_seed = int(rng.integers(2**32))

    def loss_fn(p):
        out = forward(config, p, x, norm, training=True, rng=np.random.default_rng(mask_seed))
        if loss == "smape":
            return ad.smape_loss(out, targets)
        return ad.mse_loss(out, targets)

    return check_gradients(loss_fn, params, **kwargs)
