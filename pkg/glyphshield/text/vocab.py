"""Character vocabulary for one-hot encoding."""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

UNKNOWN = -1
DEFAULT_MAX_LEN = 256
# 26 letters, 10 digits, 32 ASCII punctuation marks, newline and space.
DEFAULT_ALPHABET = string.ascii_lowercase + string.digits + string.punctuation + "\n "


def fold(ch: str, case_fold: bool) -> str:
    """Lowercase one character when that keeps it a single character."""
    if not case_fold:
        return ch
    lowered = ch.lower()
    return lowered if len(lowered) == 1 else ch


@dataclass(frozen=True)
class Vocabulary:
    """Dense character -> index map with an UNKNOWN sentinel.

    Args:
        chars: Symbols in index order.
        max_len: Characters kept per text (longer texts are truncated).
        case_fold: Lowercase characters before lookup.

    Example:
        >>> vocab = Vocabulary(chars=("a", "b"), max_len=4)
        >>> vocab.lookup("b"), vocab.lookup("ƅ")
        (1, -1)

    Plain meaning: Which characters the text model knows by name.
    """

    chars: tuple[str, ...]
    max_len: int = DEFAULT_MAX_LEN
    case_fold: bool = True
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("vocabulary symbols must be unique")
        if any(len(ch) != 1 for ch in self.chars):
            raise ValueError("vocabulary symbols must be single characters")
        if self.max_len < 1:
            raise ValueError("max_len must be positive")
        object.__setattr__(self, "_index", {ch: i for i, ch in enumerate(self.chars)})

    @property
    def size(self) -> int:
        return len(self.chars)

    def __len__(self) -> int:
        return len(self.chars)

    def lookup(self, ch: str) -> int:
        return self._index.get(fold(ch, self.case_fold), UNKNOWN)

    def indices(self, text: str) -> np.ndarray:
        """max_len indices; UNKNOWN for unmapped characters and padding."""
        out = np.full(self.max_len, UNKNOWN, dtype=np.int64)
        for position, ch in enumerate(text[: self.max_len]):
            out[position] = self.lookup(ch)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "chars": "".join(self.chars),
            "max_len": self.max_len,
            "case_fold": self.case_fold,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Vocabulary":
        return cls(
            chars=tuple(data["chars"]),
            max_len=int(data["max_len"]),
            case_fold=bool(data["case_fold"]),
        )


def build_vocabulary(
    texts: Iterable[str],
    max_len: int = DEFAULT_MAX_LEN,
    case_fold: bool = True,
    alphabet: str = DEFAULT_ALPHABET,
) -> Vocabulary:
    """Vocabulary of the alphabet symbols that occur in the training texts.

    Symbols keep alphabet order. Characters outside the alphabet stay
    unknown.
    """
    seen: set[str] = set()
    for text in texts:
        seen.update(fold(ch, case_fold) for ch in text)
    return Vocabulary(
        chars=tuple(ch for ch in alphabet if ch in seen),
        max_len=max_len,
        case_fold=case_fold,
    )
