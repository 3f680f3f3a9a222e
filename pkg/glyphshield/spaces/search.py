"""Exact cosine nearest-neighbor search over embedding spaces.

Spaces hold at most a few thousand entries, so every query scans them all.

Plain meaning: Find the characters whose vectors point the same way.
"""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from glyphshield.errors import LengthMismatch, UnknownCodepoint, ZeroVector
from glyphshield.spaces.models import EmbeddingSpace, NeighborSet


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity u.v / (|u| |v|), computed in float64.

    Raises:
        LengthMismatch: The vectors differ in length.
        ZeroVector: Either vector is all zero.

    Example:
        >>> round(cosine(np.array([1, 2, 3]), np.array([4, 5, 6])), 5)
        0.97463
    """
    a = np.asarray(u, dtype=np.float64).reshape(-1)
    b = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise LengthMismatch(f"cannot compare lengths {a.size} and {b.size}")
    norm_a = float(np.sqrt(np.dot(a, a)))
    norm_b = float(np.sqrt(np.dot(b, b)))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    value = float(np.dot(a, b)) / (norm_a * norm_b)
    return min(1.0, max(-1.0, value))


def top_k(space: EmbeddingSpace, cp: int, k: int) -> NeighborSet:
    """The k codepoints most cosine-similar to cp, excluding cp.

    Ties are broken by ascending codepoint. Fewer than k neighbors are
    returned when the space is smaller.

    Raises:
        UnknownCodepoint: cp is not in the space.
        ValueError: k is not positive.

    Plain meaning: The k closest look-alikes of a character.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if cp not in space:
        raise UnknownCodepoint(cp)
    query = space.vector(cp)
    scored = [
        (cosine(query, space.matrix[i]), other)
        for i, other in enumerate(space.codepoints)
        if other != cp
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    best = scored[:k]
    return NeighborSet(
        codepoint=cp,
        neighbors=tuple(other for _, other in best),
        similarities=tuple(sim for sim, _ in best),
    )


def neighbor_sets(
    space: EmbeddingSpace, k: int, cps: Optional[Iterable[int]] = None
) -> dict[int, NeighborSet]:
    """top_k for many codepoints (default: every codepoint in the space)."""
    targets = sorted(set(cps)) if cps is not None else list(space.codepoints)
    missing = [cp for cp in targets if cp not in space]
    if missing:
        raise UnknownCodepoint(missing[0])
    return {cp: top_k(space, cp, k) for cp in targets}
