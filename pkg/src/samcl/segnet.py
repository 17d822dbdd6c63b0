"""Small UNet-style encoder/decoder producing per-pixel class logits.

Each stage is a double 3x3 conv + relu. The encoder downsamples with 2x2 max
pooling; the decoder upsamples by nearest neighbour followed by a 3x3 conv,
concatenates the skip connection and applies another double conv. A final 1x1
conv maps to ``num_classes`` channels.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractViolation
from .tensor import Tensor


@dataclass
class UNetConfig:
    depth: int = 3
    base_channels: int = 16
    num_classes: int = 6
    input_channels: int = 1

    @property
    def size_multiple(self) -> int:
        """Input H and W must be multiples of this (pooling depth and the aux net's 8)."""
        return math.lcm(2 ** self.depth, 8)


@dataclass
class ModelParams:
    config: UNetConfig
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.tensors.items()}

    def config_dict(self) -> dict:
        return asdict(self.config)

    @classmethod
    def from_state(cls, config: UNetConfig, state: dict[str, np.ndarray]) -> "ModelParams":
        expected = _layer_shapes(config)
        missing = [name for name in expected if name not in state]
        if missing:
            raise ContractViolation(f"checkpoint is missing parameters: {missing[:4]}")
        tensors = {}
        for name, shape in expected.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != shape:
                raise ContractViolation(f"parameter {name}: shape {arr.shape} != expected {shape}")
            tensors[name] = Tensor(arr.copy(), requires_grad=True)
        return cls(config, tensors)


def xavier_uniform(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Glorot/Xavier uniform for conv weights [C_out, C_in, k, k]."""
    c_out, c_in = shape[0], shape[1]
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    bound = math.sqrt(6.0 / (c_in * receptive + c_out * receptive))
    return rng.uniform(-bound, bound, size=shape)


def _conv_specs(cfg: UNetConfig) -> list[tuple[str, int, int, int]]:
    """(name, c_in, c_out, k) for every conv layer in forward order."""
    if cfg.depth < 1 or cfg.base_channels < 1 or cfg.num_classes < 2 or cfg.input_channels < 1:
        raise ContractViolation(f"invalid UNetConfig {cfg}")
    specs = []
    ch = [cfg.base_channels * 2 ** i for i in range(cfg.depth + 1)]
    c_prev = cfg.input_channels
    for i in range(cfg.depth):
        specs += [(f"enc{i}.conv1", c_prev, ch[i], 3), (f"enc{i}.conv2", ch[i], ch[i], 3)]
        c_prev = ch[i]
    specs += [("mid.conv1", c_prev, ch[-1], 3), ("mid.conv2", ch[-1], ch[-1], 3)]
    for i in reversed(range(cfg.depth)):
        specs += [
            (f"dec{i}.up", ch[i + 1], ch[i], 3),
            (f"dec{i}.conv1", 2 * ch[i], ch[i], 3),
            (f"dec{i}.conv2", ch[i], ch[i], 3),
        ]
    specs.append(("head", ch[0], cfg.num_classes, 1))
    return specs


def _layer_shapes(cfg: UNetConfig) -> dict[str, tuple[int, ...]]:
    shapes = {}
    for name, c_in, c_out, k in _conv_specs(cfg):
        shapes[f"{name}.weight"] = (c_out, c_in, k, k)
        shapes[f"{name}.bias"] = (c_out,)
    return shapes


def build(cfg: UNetConfig, rng: np.random.Generator) -> ModelParams:
    tensors = {}
    for name, shape in _layer_shapes(cfg).items():
        data = xavier_uniform(shape, rng) if name.endswith(".weight") else np.zeros(shape)
        tensors[name] = Tensor(data, requires_grad=True)
    return ModelParams(cfg, tensors)


def parameter_count(cfg: UNetConfig) -> int:
    return sum(int(np.prod(s)) for s in _layer_shapes(cfg).values())


def _conv(params: ModelParams, name: str, x: Tensor, relu: bool = True) -> Tensor:
    w = params.tensors[f"{name}.weight"]
    pad = w.shape[-1] // 2
    y = T.conv2d(x, w, params.tensors[f"{name}.bias"], stride=1, padding=pad)
    return T.relu(y) if relu else y


def check_input(cfg: UNetConfig, shape: tuple[int, ...]) -> None:
    if len(shape) != 4 or shape[1] != cfg.input_channels:
        raise ContractViolation(f"segnet input must be [N, {cfg.input_channels}, H, W], got {shape}")
    m = cfg.size_multiple
    if shape[2] % m or shape[3] % m:
        raise ContractViolation(f"segnet input H={shape[2]}, W={shape[3]} must be divisible by {m}")


def forward(params: ModelParams, img: Tensor) -> Tensor:
    cfg = params.config
    img = T.as_tensor(img)
    check_input(cfg, img.shape)
    skips = []
    x = img
    for i in range(cfg.depth):
        x = _conv(params, f"enc{i}.conv2", _conv(params, f"enc{i}.conv1", x))
        skips.append(x)
        x = T.max_pool2d(x)
    x = _conv(params, "mid.conv2", _conv(params, "mid.conv1", x))
    for i in reversed(range(cfg.depth)):
        x = _conv(params, f"dec{i}.up", T.upsample_nearest2d(x))
        x = T.concat([skips[i], x], axis=1)
        x = _conv(params, f"dec{i}.conv2", _conv(params, f"dec{i}.conv1", x))
    return _conv(params, "head", x, relu=False)


def predict(params: ModelParams, img) -> np.ndarray:
    """Per-pixel argmax label mask [N, H, W]; ties go to the lowest class index."""
    with T.no_grad():
        logits = forward(params, img)
    return np.argmax(logits.data, axis=1).astype(np.int64)
