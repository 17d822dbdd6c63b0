"""Parameter updates: Adam with decoupled weight decay, and plain SGD."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from ..errors import ContractViolation
from .core import Tensor


@dataclass
class OptimizerConfig:
    kind: Literal["adam", "sgd"] = "adam"
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 1e-8
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def optimizer_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray | None],
    state: Sequence[AdamState],
    config: OptimizerConfig,
) -> list[np.ndarray]:
    """Return updated copies of ``params``; ``state`` slots are advanced in place.

    Weight decay is decoupled: ``p <- p * (1 - lr * wd)`` before the moment
    update, rather than being folded into the gradient.
    """
    if not (len(params) == len(grads) == len(state)):
        raise ContractViolation(f"optimizer_step: {len(params)} params, {len(grads)} grads, {len(state)} state slots")
    lr, wd = config.lr, config.weight_decay
    b1, b2 = config.betas
    updated = []
    for i, (p, g, s) in enumerate(zip(params, grads, state)):
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ContractViolation(f"optimizer_step: param {i} has shape {p.shape} but grad has {g.shape}")
        new = p * (1.0 - lr * wd) if wd else p.copy()
        if config.kind == "sgd":
            new = new - lr * g
        else:
            if s.m is None:
                s.m = np.zeros_like(p)
                s.v = np.zeros_like(p)
            s.step += 1
            s.m = b1 * s.m + (1.0 - b1) * g
            s.v = b2 * s.v + (1.0 - b2) * g * g
            m_hat = s.m / (1.0 - b1 ** s.step)
            v_hat = s.v / (1.0 - b2 ** s.step)
            new = new - lr * m_hat / (np.sqrt(v_hat) + config.eps)
        updated.append(new)
    return updated


@dataclass
class Optimizer:
    """Stateful wrapper that updates ``Tensor.data`` in place and clears grads."""

    params: list[Tensor]
    config: OptimizerConfig = field(default_factory=OptimizerConfig)
    state: list[AdamState] = field(init=False)

    def __post_init__(self):
        self.state = [AdamState() for _ in self.params]

    def step(self) -> None:
        new = optimizer_step([p.data for p in self.params], [p.grad for p in self.params], self.state, self.config)
        for p, d in zip(self.params, new):
            p.data = d

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
