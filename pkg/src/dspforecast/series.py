"""Evenly sampled ingress-rate series and the dataset adjustment pipeline.

Values are rates (messages per second), so downsampling averages buckets
instead of summing them. All standard deviations are population (ddof=0).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import (
    DegenerateSeriesError,
    InsufficientDataError,
    SplitTooFineError,
    StepMismatchError,
    UndefinedRelativeError,
)

NOISE_GENERATOR = "numpy.random.Generator(PCG64).standard_normal"

_RATIO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class UniformSeries:
    """Observations at ``start_time + i * step`` (UNIX seconds, UTC)."""

    start_time: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size == 0:
            raise InsufficientDataError("series must contain at least one value")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not np.all(np.isfinite(values)):
            raise ValueError("series values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "start_time", float(self.start_time))
        object.__setattr__(self, "step", float(self.step))

    def __len__(self) -> int:
        return self.values.size

    @property
    def timestamps(self) -> np.ndarray:
        return self.start_time + self.step * np.arange(len(self))

    @property
    def end_time(self) -> float:
        return self.start_time + self.step * (len(self) - 1)

    def with_values(self, values, start_time: float | None = None) -> "UniformSeries":
        start = self.start_time if start_time is None else start_time
        return UniformSeries(start, self.step, values)

    def equals(self, other: "UniformSeries") -> bool:
        return (
            self.start_time == other.start_time
            and self.step == other.step
            and np.array_equal(self.values, other.values)
        )


class RateProfile(enum.Enum):
    """Sampling rate with its daily seasonal period and forecast horizon."""

    FIVE_MIN = ("5min", 300, 288, 1)
    FIFTEEN_MIN = ("15min", 900, 96, 4)
    ONE_HOUR = ("1h", 3600, 24, 12)

    def __init__(self, label, step_seconds, seasonal_period, horizon):
        self.label = label
        self.step_seconds = step_seconds
        self.seasonal_period = seasonal_period
        self.horizon = horizon

    @classmethod
    def parse(cls, text: str) -> "RateProfile":
        key = str(text).strip().lower()
        aliases = {
            "5min": cls.FIVE_MIN, "5m": cls.FIVE_MIN, "five_min": cls.FIVE_MIN, "300": cls.FIVE_MIN,
            "15min": cls.FIFTEEN_MIN, "15m": cls.FIFTEEN_MIN, "fifteen_min": cls.FIFTEEN_MIN,
            "900": cls.FIFTEEN_MIN,
            "1h": cls.ONE_HOUR, "60min": cls.ONE_HOUR, "one_hour": cls.ONE_HOUR, "hourly": cls.ONE_HOUR,
            "3600": cls.ONE_HOUR,
        }
        if key not in aliases:
            raise ValueError(f"unknown rate {text!r}; expected one of 5min, 15min, 1h")
        return aliases[key]

    @classmethod
    def from_step(cls, step_seconds: float) -> "RateProfile":
        for profile in cls:
            if profile.step_seconds == step_seconds:
                return profile
        raise ValueError(f"no rate profile with step {step_seconds}s")


@dataclass(frozen=True)
class AdjustmentParams:
    noise_sigma: float = 0.01
    target_mean: float = 108_000.0
    target_std: float = 12_000.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not self.target_std > 0:
            raise ValueError("target_std must be > 0")
        if not self.target_mean > 0:
            raise ValueError("target_mean must be > 0")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be an unsigned integer")


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = field(default=(0.8, 0.2))

    def __post_init__(self):
        fractions = tuple(float(f) for f in self.fractions)
        if not fractions:
            raise ValueError("at least one fraction required")
        if any(not (0.0 < f <= 1.0) for f in fractions):
            raise ValueError(f"fractions must lie in (0, 1], got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
        object.__setattr__(self, "fractions", fractions)

    def boundaries(self, n: int) -> list[int]:
        """Floor-cumulative segment end indices; the last one is always ``n``."""
        cumulative = np.cumsum(self.fractions)
        ends = [int(math.floor(n * c + 1e-9)) for c in cumulative[:-1]]
        return ends + [n]


NEURAL_SPLIT = SplitSpec((0.6, 0.2, 0.2))
CLASSICAL_SPLIT = SplitSpec((0.8, 0.2))


def _integer_ratio(numerator: float, denominator: float) -> int | None:
    ratio = numerator / denominator
    rounded = round(ratio)
    if rounded >= 1 and abs(ratio - rounded) <= _RATIO_TOL * max(1.0, ratio):
        return int(rounded)
    return None


def resample(series: UniformSeries, target_step: float) -> UniformSeries:
    """Change the sampling step of ``series``.

    Downsampling averages each bucket of ``target_step / step`` consecutive
    values and drops a trailing partial bucket. Upsampling delegates to
    :func:`interpolate`.
    """
    if target_step == series.step:
        return series
    k = _integer_ratio(target_step, series.step)
    if k is not None:
        n_buckets = len(series) // k
        if n_buckets == 0:
            raise InsufficientDataError(
                f"series of {len(series)} points is shorter than one {target_step}s bucket"
            )
        means = series.values[: n_buckets * k].reshape(n_buckets, k).mean(axis=1)
        return UniformSeries(series.start_time, target_step, means)
    if _integer_ratio(series.step, target_step) is not None:
        return interpolate(series, target_step)
    raise StepMismatchError(
        f"steps {series.step}s and {target_step}s are not integer multiples of each other"
    )


def _quadratic_spline(x: np.ndarray, y: np.ndarray):
    degree = min(2, len(x) - 1)
    return make_interp_spline(x, y, k=degree)


def interpolate(
    series: UniformSeries,
    target_step: float,
    anchor: Literal["start", "center"] = "start",
) -> UniformSeries:
    """Upsample with a C1 piecewise-quadratic interpolating spline.

    With ``anchor="start"`` each value sits at its own timestamp and the
    output runs from the first to the last original timestamp, so original
    values are reproduced exactly at every ``k``-th output point.

    With ``anchor="center"`` each value is treated as the mean of a bucket of
    ``k`` fine samples and is placed at that bucket's centre; the output then
    holds ``len(series) * k`` points covering every bucket completely. This
    is the inverse alignment of :func:`resample`, so a linear series survives
    ``resample(interpolate(s, fine, "center"), s.step)`` unchanged.
    """
    k = _integer_ratio(series.step, target_step)
    if k is None:
        raise StepMismatchError(
            f"step {series.step}s is not an integer multiple of {target_step}s"
        )
    if len(series) < 3:
        raise InsufficientDataError("spline interpolation needs at least 3 points")
    return _interpolate(series, target_step, k, anchor)


def _interpolate(series, target_step, k, anchor):
    n = len(series)
    knots = np.arange(n, dtype=float) * k
    if anchor == "start":
        fine_idx = np.arange((n - 1) * k + 1, dtype=float)
    elif anchor == "center":
        knots = knots + (k - 1) / 2.0
        fine_idx = np.arange(n * k, dtype=float)
    else:
        raise ValueError(f"unknown anchor {anchor!r}")
    if k == 1:
        return series
    spline = _quadratic_spline(knots, series.values)
    values = spline(fine_idx)
    if anchor == "start":
        values[::k] = series.values
    return UniformSeries(series.start_time, target_step, values)


def estimate_noise_sigma(fine: UniformSeries, coarse_step: float) -> float:
    """Relative error left after coarsening ``fine`` and interpolating it back.

    Returns the population standard deviation of
    ``(interpolated - original) / original`` over every fine timestamp of the
    complete coarse buckets, skipping originals equal to zero.
    """
    k = _integer_ratio(coarse_step, fine.step)
    if k is None:
        raise StepMismatchError(f"{fine.step}s does not divide {coarse_step}s")
    n_buckets = len(fine) // k
    if n_buckets < 2:
        raise InsufficientDataError("noise estimation needs at least 2 coarse buckets")
    coarse = resample(fine, coarse_step)
    back = _interpolate(coarse, fine.step, k, "center").values if k > 1 else coarse.values
    original = fine.values[: n_buckets * k]
    mask = original != 0
    if not mask.any():
        raise UndefinedRelativeError("all original values are zero")
    relative = (back[mask] - original[mask]) / original[mask]
    return float(np.std(relative))


def inject_noise(series: UniformSeries, params: AdjustmentParams) -> UniformSeries:
    """Multiply each observation by ``1 + e`` with ``e ~ N(0, noise_sigma)``."""
    if params.noise_sigma == 0:
        return series
    rng = np.random.default_rng(params.seed)
    errors = rng.standard_normal(len(series)) * params.noise_sigma
    return series.with_values(series.values * (1.0 + errors))


def scale_shift(series: UniformSeries, params: AdjustmentParams) -> UniformSeries:
    values = series.values
    std = float(np.std(values))
    if std == 0 or not np.isfinite(std):
        raise DegenerateSeriesError("cannot rescale a series with zero variance")
    z = (values - values.mean()) / std
    return series.with_values(z * params.target_std + params.target_mean)


def split(series: UniformSeries, spec: SplitSpec | Sequence[float]) -> list[UniformSeries]:
    """Chronological, contiguous split; segments concatenate back to ``series``."""
    if not isinstance(spec, SplitSpec):
        spec = SplitSpec(tuple(spec))
    ends = spec.boundaries(len(series))
    segments = []
    begin = 0
    for end in ends:
        if end <= begin:
            raise SplitTooFineError(
                f"split {spec.fractions} leaves an empty segment for length {len(series)}"
            )
        segments.append(
            UniformSeries(series.start_time + begin * series.step, series.step,
                          series.values[begin:end])
        )
        begin = end
    return segments
