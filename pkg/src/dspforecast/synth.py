"""Seeded synthetic ingress-rate traces: daily cycle + linear trend + noise."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .series import UniformSeries

DAY = 86_400


@dataclass(frozen=True)
class SynthConfig:
    days: int = 28
    step: int = 3600
    base: float = 1000.0
    # relative amplitudes of the 1st, 2nd, ... daily harmonics
    harmonics: tuple = (0.30, 0.12, 0.06, 0.03)
    phase: float = 0.3
    trend_per_day: float = 0.004  # relative to base
    noise: float = 0.015  # relative std of Gaussian noise
    seed: int = 0
    start_time: float = 1_600_000_000.0

    def __post_init__(self):
        if DAY % self.step:
            raise ValueError("step must divide one day")
        if self.days < 1 or self.base <= 0 or self.noise < 0:
            raise ValueError("days >= 1, base > 0 and noise >= 0 required")

    def to_dict(self):
        return {**asdict(self), "harmonics": list(self.harmonics)}


def daily_profile(cfg: SynthConfig, t_seconds: np.ndarray) -> np.ndarray:
    angle = 2 * np.pi * t_seconds / DAY
    shape = np.zeros_like(angle)
    for k, amp in enumerate(cfg.harmonics, start=1):
        shape += amp * np.sin(k * angle + k * cfg.phase)
    return shape


def generate(cfg: SynthConfig | None = None) -> UniformSeries:
    """Deterministic (given ``cfg.seed``) positive trace with a 24 h period."""
    cfg = cfg or SynthConfig()
    n = cfg.days * DAY // cfg.step
    t = np.arange(n) * float(cfg.step)
    clean = cfg.base * (1.0 + daily_profile(cfg, t) + cfg.trend_per_day * t / DAY)
    rng = np.random.default_rng(cfg.seed)
    values = clean * (1.0 + cfg.noise * rng.standard_normal(n))
    return UniformSeries(cfg.start_time, float(cfg.step), np.maximum(values, 1e-6 * cfg.base))
