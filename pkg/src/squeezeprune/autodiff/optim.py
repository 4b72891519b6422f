"""Stochastic gradient descent with momentum."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor


def sgdm_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], velocity: Sequence[np.ndarray],
              lr: float, momentum: float, weight_decay: float = 0.0) -> None:
    """In-place update: ``v = momentum*v + g (+ wd*p)``; ``p -= lr*v``."""
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    if not len(params) == len(grads) == len(velocity):
        raise ValueError("params, grads and velocity must have equal length")
    for p, g, v in zip(params, grads, velocity):
        if p.shape != g.shape or p.shape != v.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v *= momentum
        v += g
        if weight_decay:
            v += weight_decay * p
        p -= lr * v


class SGDM:
    """Optimizer holding velocity buffers for a fixed parameter list."""

    def __init__(self, params: Sequence[Tensor], lr: float, momentum: float = 0.9, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        sgdm_step([p.data for p in self.params], grads, self.velocity, self.lr, self.momentum, self.weight_decay)
