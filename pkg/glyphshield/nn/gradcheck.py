"""Finite-difference checks of analytic gradients."""

from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np

from glyphshield.nn.losses import softmax_cross_entropy
from glyphshield.nn.network import Network

logger = logging.getLogger(__name__)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a|| + ||n||, 1e-12)."""
    diff = float(np.linalg.norm(analytic - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return diff / max(scale, 1e-12)


def numeric_gradient(
    loss_fn: Callable[[], float],
    array: np.ndarray,
    eps: float,
    indices: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Central differences of loss_fn with respect to entries of array.

    Only the flat `indices` are perturbed (all by default); the others
    are left at 0 in the returned array.
    """
    flat = array.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    positions = range(flat.size) if indices is None else indices
    for i in positions:
        original = flat[i]
        flat[i] = original + eps
        plus = loss_fn()
        flat[i] = original - eps
        minus = loss_fn()
        flat[i] = original
        grad[i] = (plus - minus) / (2.0 * eps)
    return grad.reshape(array.shape)


def gradient_check(
    net: Network,
    x: np.ndarray,
    labels: np.ndarray,
    eps: float = 1e-3,
    samples: Optional[int] = None,
    seed: int = 0,
) -> dict[str, float]:
    """Compare backprop gradients of softmax cross-entropy to finite differences.

    Args:
        net: Network to check; use dtype float64 for meaningful results.
        x: Input batch.
        labels: Class labels for the batch.
        eps: Central-difference step.
        samples: Entries checked per parameter (all when None).
        seed: Seed choosing the sampled entries.

    Returns:
        Parameter name -> relative error over the checked entries.

    Plain meaning: Make sure the network's learning signal is computed right.
    """

    def loss_fn() -> float:
        loss, _ = softmax_cross_entropy(net.forward(x), labels)
        return loss

    _, grad = softmax_cross_entropy(net.forward(x), labels)
    net.backward(grad)
    analytic = {name: g.astype(np.float64) for name, g in net.gradients()}

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, param in net.parameters():
        indices = None
        if samples is not None and samples < param.size:
            indices = np.sort(rng.choice(param.size, size=samples, replace=False))
        numeric = numeric_gradient(loss_fn, param, eps, indices)
        expected = analytic[name]
        if indices is not None:
            expected = expected.reshape(-1)[indices]
            numeric = numeric.reshape(-1)[indices]
        errors[name] = relative_error(expected, numeric)
        logger.debug("gradient check %s: %.3g", name, errors[name])
    net.clear()
    return errors


def input_gradient_check(
    net: Network, x: np.ndarray, labels: np.ndarray, eps: float = 1e-3
) -> float:
    """Relative error of d(loss)/d(input) against finite differences."""

    def loss_fn() -> float:
        loss, _ = softmax_cross_entropy(net.forward(probe), labels)
        return loss

    probe = x.astype(np.float64, copy=True)
    _, grad = softmax_cross_entropy(net.forward(probe), labels)
    analytic = net.backward(grad).astype(np.float64)
    numeric = numeric_gradient(loss_fn, probe, eps)
    net.clear()
    return relative_error(analytic, numeric)
