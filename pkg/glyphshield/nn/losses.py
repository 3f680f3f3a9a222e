"""Classification loss and decision helpers."""

from __future__ import annotations

import numpy as np

from glyphshield.errors import LabelOutOfRange, ShapeMismatch


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient with respect to the logits.

    Args:
        logits: N x K scores.
        labels: N class indices in [0, K).

    Returns:
        (loss, grad) with grad = (softmax - onehot) / N.

    Raises:
        LabelOutOfRange: A label is negative or >= K.
        ShapeMismatch: Label count differs from the batch size.

    Example:
        >>> loss, _ = softmax_cross_entropy(np.zeros((1, 4)), np.array([2]))
        >>> round(loss, 6) == round(float(np.log(4)), 6)
        True
    """
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeMismatch(f"{labels.shape[0]} labels for a batch of {n}")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    if n == 0:
        return 0.0, np.zeros_like(logits)

    shifted = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
    log_sum = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_sum - shifted[rows, labels]))

    grad = np.exp(shifted - log_sum[:, None])
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


def predict_labels(logits: np.ndarray) -> np.ndarray:
    """Argmax decision; ties resolve to the lowest class index."""
    return logits.argmax(axis=1)
