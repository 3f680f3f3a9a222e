"""
Labeled text datasets.

CSV files follow the classic text-classification distribution layout:
``class, title, description`` with classes numbered from 1 (two-column
files carry ``class, text``). Labels are stored 0-based.

Plain meaning: Load news, encyclopedia or review texts with their categories.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from glyphshield.errors import InsufficientSamples, MalformedCSV

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TextSample:
    """One labeled text; label is 0-based."""

    label: int
    text: str


@dataclass(frozen=True)
class Dataset:
    """An immutable list of labeled texts.

    Args:
        samples: The texts with labels.
        num_classes: Number of classes (labels lie in [0, num_classes)).
        name: Free-form identifier, usually the source file.

    Plain meaning: A pile of texts, each tagged with its category.
    """

    samples: tuple[TextSample, ...]
    num_classes: int
    name: str = ""

    def __post_init__(self) -> None:
        for sample in self.samples:
            if not 0 <= sample.label < self.num_classes:
                raise ValueError(
                    f"label {sample.label} outside [0, {self.num_classes}) "
                    f"in {self.name}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.samples]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def class_counts(self) -> dict[int, int]:
        counts = Counter(s.label for s in self.samples)
        return {label: counts.get(label, 0) for label in range(self.num_classes)}

    def subset(self, indices: Iterable[int], name: Optional[str] = None) -> "Dataset":
        return Dataset(
            samples=tuple(self.samples[int(i)] for i in indices),
            num_classes=self.num_classes,
            name=name or self.name,
        )

    def with_texts(self, texts: Sequence[str], name: Optional[str] = None) -> "Dataset":
        """Same labels, replaced texts (used for perturbed copies)."""
        if len(texts) != len(self.samples):
            raise ValueError("text count must match sample count")
        return Dataset(
            samples=tuple(TextSample(s.label, t) for s, t in zip(self.samples, texts)),
            num_classes=self.num_classes,
            name=name or self.name,
        )


def load_csv(path: Union[str, Path], num_classes: Optional[int] = None) -> Dataset:
    """Read a classification CSV.

    Args:
        path: CSV file (UTF-8).
        num_classes: Class count; inferred from the largest label when None.

    Returns:
        Dataset with 0-based labels; text is title + " " + description.

    Raises:
        MalformedCSV: With the 1-based line number of the first bad row.
        OSError: If the file cannot be read.

    Example:
        >>> ds = load_csv("ag_news/train.csv")
        >>> ds.num_classes
        4
    """
    source = Path(path)
    samples: list[TextSample] = []
    with open(source, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) < 2:
                    raise MalformedCSV("expected class and text columns", line)
                try:
                    klass = int(row[0])
                except ValueError:
                    raise MalformedCSV(
                        f"class {row[0]!r} is not an integer", line
                    ) from None
                if klass < 1:
                    raise MalformedCSV(f"class {klass} must start at 1", line)
                text = " ".join(row[1:]) if len(row) > 2 else row[1]
                samples.append(TextSample(klass - 1, text))
        except csv.Error as exc:
            raise MalformedCSV(str(exc), reader.line_num) from exc

    inferred = max((s.label for s in samples), default=-1) + 1
    classes = num_classes if num_classes is not None else inferred
    if inferred > classes:
        raise MalformedCSV(f"class {inferred} exceeds {classes} classes", 0)
    logger.info("Loaded %d samples (%d classes) from %s", len(samples), classes, source)
    return Dataset(samples=tuple(samples), num_classes=classes, name=source.name)


def stratified_subsample(dataset: Dataset, n: int, seed: int = 0) -> Dataset:
    """Draw n samples with an equal share per class (remainder to low labels).

    Chosen samples keep their original order.

    Raises:
        InsufficientSamples: A class has fewer rows than its share.
    """
    if n < 0:
        raise ValueError("subsample size must be non-negative")
    k = dataset.num_classes
    shares = [n // k + (1 if label < n % k else 0) for label in range(k)]
    by_class: dict[int, list[int]] = {label: [] for label in range(k)}
    for index, sample in enumerate(dataset.samples):
        by_class[sample.label].append(index)

    chosen: list[int] = []
    for label, share in enumerate(shares):
        pool = by_class[label]
        if share > len(pool):
            raise InsufficientSamples(
                f"{dataset.name}: class {label + 1} has {len(pool)} samples, "
                f"{share} requested"
            )
        rng = np.random.default_rng(np.random.SeedSequence([seed, label]))
        chosen.extend(pool[i] for i in rng.permutation(len(pool))[:share])
    return dataset.subset(sorted(chosen))


def train_val_split(
    dataset: Dataset, val_fraction: float, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Seeded random hold-out split; val_fraction 0 gives an empty val set."""
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError("val_fraction must lie in [0, 1)")
    order = np.random.default_rng(seed).permutation(len(dataset))
    n_val = int(round(val_fraction * len(dataset)))
    val = sorted(order[:n_val].tolist())
    train = sorted(order[n_val:].tolist())
    return dataset.subset(train), dataset.subset(val)
