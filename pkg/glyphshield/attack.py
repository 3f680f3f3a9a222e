"""
Visual perturbation attack, replacement sets and the fair split protocol.

Plain meaning: Swap letters for look-alikes, and keep test swaps out of training.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from glyphshield.codepoints import format_cp, is_scalar, parse_cp
from glyphshield.config import schema_errors, schema_validator
from glyphshield.errors import LeakageError, MalformedHSetFile
from glyphshield.spaces.models import NeighborSet
from glyphshield.text.data import Dataset

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.75
SHIPPED_HSET = Path(__file__).resolve().parent / "data" / "hset_letters.json"


@dataclass(frozen=True)
class HSet:
    """Curated replacement lists: codepoint -> visually similar codepoints.

    Args:
        replacements: codepoint -> non-empty tuple of other codepoints.
        provenance: Where the lists came from (space kind, curation method,
            notes).

    Raises:
        ValueError: A list is empty, contains its own key, repeats an entry,
            or holds a non-scalar codepoint.

    Plain meaning: The approved look-alikes for each character.
    """

    replacements: Mapping[int, tuple[int, ...]]
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for cp, targets in self.replacements.items():
            if not is_scalar(cp):
                raise ValueError(f"key {cp:#x} is not a Unicode scalar")
            if not targets:
                raise ValueError(f"{format_cp(cp)} has an empty replacement list")
            if cp in targets:
                raise ValueError(f"{format_cp(cp)} maps to itself")
            if len(set(targets)) != len(targets):
                raise ValueError(f"{format_cp(cp)} repeats a replacement")
            bad = [t for t in targets if not is_scalar(t)]
            if bad:
                raise ValueError(f"{format_cp(cp)} lists non-scalar {bad[0]:#x}")

    def __len__(self) -> int:
        return len(self.replacements)

    def __contains__(self, cp: object) -> bool:
        return cp in self.replacements

    def __getitem__(self, cp: int) -> tuple[int, ...]:
        return self.replacements[cp]

    @property
    def codepoints(self) -> list[int]:
        return sorted(self.replacements)

    @property
    def pair_count(self) -> int:
        """Total number of (character, replacement) pairs."""
        return sum(len(targets) for targets in self.replacements.values())

    def to_json_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"provenance": dict(self.provenance)}
        for cp in self.codepoints:
            data[format_cp(cp)] = [format_cp(t) for t in self.replacements[cp]]
        return data


def save_hset(hset: HSet, path: Union[str, Path]) -> Path:
    """Write an HSet as JSON ("U+XXXX" keys plus a provenance object)."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(
        json.dumps(hset.to_json_dict(), indent=2, ensure_ascii=True) + "\n",
        encoding="utf-8",
    )
    return target


def hset_from_dict(data: Any, source: str = "<data>") -> HSet:
    """Validate parsed JSON against the h_set schema and build an HSet.

    Raises:
        MalformedHSetFile: Schema violation, self-map or bad codepoint.
    """
    errors = list(schema_errors(schema_validator("hset.schema.json"), data))
    if errors:
        raise MalformedHSetFile(f"{source}: " + "; ".join(errors))
    try:
        replacements = {
            parse_cp(key): tuple(parse_cp(v) for v in values)
            for key, values in data.items()
            if key != "provenance"
        }
        return HSet(replacements=replacements, provenance=dict(data["provenance"]))
    except ValueError as exc:
        raise MalformedHSetFile(f"{source}: {exc}") from exc


def load_hset(path: Union[str, Path] = SHIPPED_HSET) -> HSet:
    """Load and validate an h_set file (default: the shipped a-z/A-Z set).

    Raises:
        MalformedHSetFile: Unreadable JSON or invalid content.

    Example:
        >>> hset = load_hset()
        >>> len(hset)
        52
    """
    source = Path(path)
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHSetFile(f"Cannot read h_set {source}: {exc}") from exc
    hset = hset_from_dict(data, str(source))
    logger.info("Loaded h_set %s: %d characters", source, len(hset))
    return hset


def curate_hset(
    neighbors: Optional[Mapping[int, NeighborSet]] = None,
    mode: str = "threshold",
    threshold: float = DEFAULT_THRESHOLD,
    path: Optional[Union[str, Path]] = None,
    space_kind: str = "",
) -> HSet:
    """Build a replacement set from neighbor sets or a curated file.

    Threshold mode keeps neighbors with similarity >= threshold and drops
    characters left with none. File mode loads a curated file verbatim.

    Args:
        neighbors: Neighbor sets (threshold mode).
        mode: "threshold" or "file".
        threshold: Minimum similarity, in (0, 1].
        path: Curated file (file mode; default the shipped set).
        space_kind: Recorded in the provenance.

    Raises:
        ValueError: Bad mode, threshold outside (0, 1] or missing neighbors.
        MalformedHSetFile: File mode with an invalid file.

    Plain meaning: Keep only the look-alikes that are close enough.
    """
    if mode == "file":
        return load_hset(path or SHIPPED_HSET)
    if mode != "threshold":
        raise ValueError(f"unknown curation mode {mode!r}")
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    if neighbors is None:
        raise ValueError("threshold mode needs neighbor sets")
    replacements = {}
    for cp in sorted(neighbors):
        kept = neighbors[cp].above(threshold)
        if kept:
            replacements[cp] = kept
    return HSet(
        replacements=replacements,
        provenance={
            "space_kind": space_kind,
            "curation": "threshold",
            "threshold": threshold,
        },
    )


@dataclass(frozen=True)
class AttackSpec:
    """Parameters of one perturbation attack.

    Args:
        p: Per-character replacement probability in [0, 1].
        neighbors: codepoint -> candidate replacements.
        seed: Attack seed.

    Plain meaning: How often to swap and what to swap with.
    """

    p: float
    neighbors: Mapping[int, Sequence[int]]
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @classmethod
    def from_source(
        cls,
        p: float,
        source: Union[HSet, Mapping[int, NeighborSet]],
        seed: int = 0,
    ) -> "AttackSpec":
        """Build from an HSet or a NeighborSet collection."""
        if isinstance(source, HSet):
            table = {cp: tuple(targets) for cp, targets in source.replacements.items()}
        else:
            table = {cp: ns.neighbors for cp, ns in source.items() if ns.neighbors}
        return cls(p=p, neighbors=table, seed=seed)


def vp_perturb(text: str, spec: AttackSpec, sample_key: int = 0) -> str:
    """Replace each character, with probability p, by a random neighbor.

    Draws come from a counter-based generator keyed by (seed, sample_key):
    position i always consumes the i-th pair of uniforms, so the result
    does not depend on which other samples were perturbed first.
    Characters without neighbors are never replaced.

    Args:
        text: Input text.
        spec: Probability, neighbor table and seed.
        sample_key: Identifies the sample (its dataset index).

    Returns:
        Text of the same length.

    Example:
        >>> spec = AttackSpec(p=1.0, neighbors={ord("a"): (0x430,)})
        >>> vp_perturb("aa", spec)
        'аа'

    Plain meaning: Sprinkle look-alike letters into a text.
    """
    if not text or spec.p == 0.0:
        return text
    bits = np.random.Philox(np.random.SeedSequence([spec.seed, sample_key]))
    draws = np.random.Generator(bits).random((len(text), 2))
    out = []
    for position, ch in enumerate(text):
        choices = spec.neighbors.get(ord(ch))
        if choices and draws[position, 0] < spec.p:
            pick = min(int(draws[position, 1] * len(choices)), len(choices) - 1)
            out.append(chr(choices[pick]))
        else:
            out.append(ch)
    return "".join(out)


def perturb_dataset(dataset: Dataset, spec: AttackSpec, key_offset: int = 0) -> Dataset:
    """vp_perturb every sample, keyed by its index (plus key_offset)."""
    texts = [
        vp_perturb(s.text, spec, key_offset + i)
        for i, s in enumerate(dataset.samples)
    ]
    return dataset.with_texts(texts)


@dataclass(frozen=True)
class SplitResult:
    """Disjoint train/eval halves of each character's shared neighbors.

    Args:
        halves: codepoint -> (train_half, eval_half), both ascending.
        seed: Split seed.
        excluded: codepoint -> intersection size, for characters whose
            intersection had fewer than two members.

    Plain meaning: Which look-alikes may be trained on and which are kept for testing.
    """

    halves: Mapping[int, tuple[tuple[int, ...], tuple[int, ...]]]
    seed: int
    excluded: Mapping[int, int] = field(default_factory=dict)

    def train_hset(self, space_kind: str = "intersection") -> HSet:
        return HSet(
            replacements={cp: train for cp, (train, _) in self.halves.items()},
            provenance={
                "space_kind": space_kind,
                "curation": "split",
                "notes": "train half",
            },
        )

    def eval_hset(self, space_kind: str = "intersection") -> HSet:
        return HSet(
            replacements={cp: ev for cp, (_, ev) in self.halves.items()},
            provenance={
                "space_kind": space_kind,
                "curation": "split",
                "notes": "eval half",
            },
        )

    def verify_disjoint(self) -> None:
        """Raise LeakageError if any character's halves share a replacement."""
        for cp, (train, ev) in self.halves.items():
            shared = set(train) & set(ev)
            if shared:
                raise LeakageError(
                    f"{format_cp(cp)}: {format_cp(min(shared))} is in both halves"
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "halves": {
                format_cp(cp): {
                    "train": [format_cp(t) for t in train],
                    "eval": [format_cp(e) for e in ev],
                }
                for cp, (train, ev) in sorted(self.halves.items())
            },
            "excluded": {
                format_cp(cp): size for cp, size in sorted(self.excluded.items())
            },
        }


def intersection_split(
    hset_i2ces: HSet, dces: Mapping[int, NeighborSet], seed: int = 0
) -> SplitResult:
    """Split each character's h_set/DCES overlap into train and eval halves.

    The eval half gets floor(|I| / 2) members, the train half the rest.
    Characters with |I| < 2 are excluded and reported.

    Example:
        >>> result = intersection_split(hset, dces, seed=0)
        >>> result.verify_disjoint()

    Plain meaning: Share the agreed look-alikes fairly between training and testing.
    """
    halves: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = {}
    excluded: dict[int, int] = {}
    for cp in sorted(set(hset_i2ces.codepoints) | set(dces)):
        visual = set(hset_i2ces.replacements.get(cp, ()))
        shared = sorted(visual & _dces_members(dces, cp))
        if len(shared) < 2:
            excluded[cp] = len(shared)
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, cp]))
        order = [shared[i] for i in rng.permutation(len(shared))]
        n_eval = len(shared) // 2
        halves[cp] = (tuple(sorted(order[n_eval:])), tuple(sorted(order[:n_eval])))
    logger.info(
        "Intersection split: %d characters split, %d excluded",
        len(halves),
        len(excluded),
    )
    return SplitResult(halves=halves, seed=seed, excluded=excluded)


def _dces_members(dces: Mapping[int, NeighborSet], cp: int) -> set[int]:
    entry = dces.get(cp)
    return set(entry.neighbors) if entry is not None else set()

