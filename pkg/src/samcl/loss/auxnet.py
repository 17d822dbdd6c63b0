"""Auxiliary multi-scale network: three stride-2 3x3 convs, C -> C channels, relu."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import tensor as T
from ..errors import ContractViolation
from ..segnet import xavier_uniform
from ..tensor import Tensor

NUM_LAYERS = 3


@dataclass
class AuxNet:
    num_classes: int
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {f"aux.{k}": v.data for k, v in self.tensors.items()}

    @classmethod
    def from_state(cls, num_classes: int, state: dict[str, np.ndarray]) -> "AuxNet":
        net = cls(num_classes)
        for i in range(NUM_LAYERS):
            for part, shape in ((f"conv{i}.weight", (num_classes, num_classes, 3, 3)), (f"conv{i}.bias", (num_classes,))):
                arr = np.asarray(state[f"aux.{part}"], dtype=np.float64)
                if arr.shape != shape:
                    raise ContractViolation(f"aux.{part}: shape {arr.shape} != {shape}")
                net.tensors[part] = Tensor(arr.copy(), requires_grad=True)
        return net


def build_auxnet(num_classes: int, rng: np.random.Generator) -> AuxNet:
    net = AuxNet(num_classes)
    for i in range(NUM_LAYERS):
        shape = (num_classes, num_classes, 3, 3)
        net.tensors[f"conv{i}.weight"] = Tensor(xavier_uniform(shape, rng), requires_grad=True)
        net.tensors[f"conv{i}.bias"] = Tensor(np.zeros(num_classes), requires_grad=True)
    return net


def aux_forward(x, net: AuxNet) -> tuple[Tensor, Tensor, Tensor]:
    """Feature maps after each layer: [N,C,H/2,W/2], [N,C,H/4,W/4], [N,C,H/8,W/8]."""
    x = T.as_tensor(x)
    if x.ndim != 4 or x.shape[1] != net.num_classes:
        raise ContractViolation(f"aux_forward: expected [N, {net.num_classes}, H, W], got {x.shape}")
    if x.shape[2] % 8 or x.shape[3] % 8:
        raise ContractViolation(f"aux_forward: H={x.shape[2]}, W={x.shape[3]} must be divisible by 8")
    taps = []
    for i in range(NUM_LAYERS):
        x = T.relu(T.conv2d(x, net.tensors[f"conv{i}.weight"], net.tensors[f"conv{i}.bias"], stride=2, padding=1))
        taps.append(x)
    return tuple(taps)
