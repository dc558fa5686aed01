"""GRU and 1-D CNN forecasters that emit the whole horizon in one pass."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass(frozen=True)
class Normalization:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("normalization std must be > 0")

    @classmethod
    def fit(cls, values) -> "Normalization":
        values = np.asarray(values, dtype=float)
        std = float(values.std())
        return cls(float(values.mean()), std if std > 0 else 1.0)

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def denormalize(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean


@dataclass(frozen=True)
class GRUConfig:
    input_len: int
    hidden_size: int = 32
    num_layers: int = 1
    dropout_rate: float = 0.0
    horizon: int = 1

    arch = "gru"

    def __post_init__(self):
        if self.input_len < self.horizon:
            raise ValueError("input_len must be >= horizon")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.hidden_size < 1 or self.num_layers < 1 or self.horizon < 1:
            raise ValueError("hidden_size, num_layers and horizon must be positive")

    def to_dict(self):
        return {"arch": self.arch, **asdict(self)}


@dataclass(frozen=True)
class CNNConfig:
    input_len: int
    channels: tuple = (32,)
    kernel_size: int = 3
    dropout_rate: float = 0.0
    horizon: int = 1

    arch = "cnn"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if not self.channels or min(self.channels) < 1:
            raise ValueError("at least one convolution layer with >= 1 channel required")
        if self.kernel_size < 2 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 3")
        if self.receptive_field > self.input_len:
            raise ValueError(
                f"receptive field {self.receptive_field} exceeds input_len {self.input_len}")
        if self.input_len < self.horizon:
            raise ValueError("input_len must be >= horizon")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def num_layers(self) -> int:
        return len(self.channels)

    @property
    def receptive_field(self) -> int:
        return 1 + self.num_layers * (self.kernel_size - 1)

    def to_dict(self):
        return {"arch": self.arch, **asdict(self), "channels": list(self.channels)}


def config_from_dict(data: dict):
    data = dict(data)
    arch = data.pop("arch")
    if arch == "gru":
        return GRUConfig(**data)
    if arch == "cnn":
        data["channels"] = tuple(data["channels"])
        return CNNConfig(**data)
    raise ValueError(f"unknown architecture {arch!r}")


def param_shapes(config) -> dict[str, tuple]:
    """Parameter names, shapes and fan-in, in initialisation order."""
    shapes = {}
    if isinstance(config, GRUConfig):
        H = config.hidden_size
        for layer in range(config.num_layers):
            n_in = 1 if layer == 0 else H
            shapes[f"gru{layer}.w_ih"] = ((n_in, 3 * H), H)
            shapes[f"gru{layer}.w_hh"] = ((H, 3 * H), H)
            shapes[f"gru{layer}.b_ih"] = ((3 * H,), H)
            shapes[f"gru{layer}.b_hh"] = ((3 * H,), H)
        shapes["head.w"] = ((H, config.horizon), H)
        shapes["head.b"] = ((config.horizon,), H)
    elif isinstance(config, CNNConfig):
        c_in = 1
        for layer, c_out in enumerate(config.channels):
            fan_in = c_in * config.kernel_size
            shapes[f"conv{layer}.w"] = ((c_out, c_in, config.kernel_size), fan_in)
            shapes[f"conv{layer}.b"] = ((c_out,), fan_in)
            c_in = c_out
        features = c_in * config.input_len
        shapes["head.w"] = ((features, config.horizon), features)
        shapes["head.b"] = ((config.horizon,), features)
    else:
        raise TypeError(f"unsupported config {type(config).__name__}")
    return shapes


def init_params(config, rng: np.random.Generator) -> dict[str, Tensor]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation, in a fixed order."""
    params = {}
    for name, (shape, fan_in) in param_shapes(config).items():
        bound = 1.0 / np.sqrt(fan_in)
        params[name] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True,
                              name=name)
    return params


def _check_input(config, params, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != config.input_len:
        raise ValueError(f"expected windows of length {config.input_len}, got shape {x.shape}")
    expected = {k: shape for k, (shape, _) in param_shapes(config).items()}
    actual = {k: tuple(v.shape) for k, v in params.items()}
    if expected != actual:
        raise ValueError("parameter shapes do not match the configuration")
    return x


def _dropout(t: Tensor, rate: float, training: bool, rng) -> Tensor:
    if not training or rate == 0.0:
        return t
    keep = rng.random(t.shape) >= rate
    return t * (keep / (1.0 - rate))


def gru_forward(config: GRUConfig, params, x_norm, norm: Normalization,
                training: bool = False, rng=None) -> Tensor:
    """Normalized windows (batch, input_len) -> de-normalized (batch, horizon)."""
    x = _check_input(config, params, x_norm)
    h = Tensor(x[:, :, None])
    for layer in range(config.num_layers):
        if layer > 0:
            h = _dropout(h, config.dropout_rate, training, rng)
        h = ad.gru_layer(h, params[f"gru{layer}.w_ih"], params[f"gru{layer}.w_hh"],
                         params[f"gru{layer}.b_ih"], params[f"gru{layer}.b_hh"])
    last = h[:, -1, :]
    out = last @ params["head.w"] + params["head.b"]
    return out * norm.std + norm.mean


def cnn_forward(config: CNNConfig, params, x_norm, norm: Normalization,
                training: bool = False, rng=None) -> Tensor:
    x = _check_input(config, params, x_norm)
    h = Tensor(x[:, None, :])
    for layer in range(config.num_layers):
        h = ad.relu(ad.conv1d(h, params[f"conv{layer}.w"], params[f"conv{layer}.b"]))
        h = _dropout(h, config.dropout_rate, training, rng)
    flat = ad.reshape(h, (h.shape[0], -1))
    out = flat @ params["head.w"] + params["head.b"]
    return out * norm.std + norm.mean


def forward(config, params, x_norm, norm, training=False, rng=None) -> Tensor:
    if isinstance(config, GRUConfig):
        return gru_forward(config, params, x_norm, norm, training, rng)
    return cnn_forward(config, params, x_norm, norm, training, rng)
