"""Stochastic gradient descent."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from glyphshield.errors import ShapeMismatch


def sgd_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr: float
) -> Sequence[np.ndarray]:
    """In-place update w <- w - lr * g for each parameter array.

    Raises:
        ShapeMismatch: Counts or shapes of params and grads differ.
        ValueError: lr is negative.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if len(params) != len(grads):
        raise ShapeMismatch(f"{len(params)} parameters but {len(grads)} gradients")
    for param, grad in zip(params, grads):
        if param.shape != grad.shape:
            raise ShapeMismatch(f"parameter {param.shape} vs gradient {grad.shape}")
    for param, grad in zip(params, grads):
        param -= (lr * grad).astype(param.dtype, copy=False)
    return params


class SGD:
    """SGD with classical momentum: v <- m v + g; w <- w - lr v.

    With momentum 0 every step is exactly sgd_step.

    Plain meaning: Nudge every weight downhill, keeping some speed.
    """

    def __init__(self, params: Sequence[np.ndarray], lr: float, momentum: float = 0.9):
        if lr < 0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._velocity = [np.zeros_like(p) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if self.momentum == 0.0:
            sgd_step(self.params, grads, self.lr)
            return
        if len(grads) != len(self.params):
            raise ShapeMismatch(
                f"{len(self.params)} parameters but {len(grads)} gradients"
            )
        for velocity, grad in zip(self._velocity, grads):
            if velocity.shape != grad.shape:
                raise ShapeMismatch(
                    f"parameter {velocity.shape} vs gradient {grad.shape}"
                )
            velocity *= self.momentum
            velocity += grad
        sgd_step(self.params, self._velocity, self.lr)
