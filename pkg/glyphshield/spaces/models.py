"""
Embedding-space and neighbor-set data models.

Plain meaning: The typed shapes of character spaces and look-alike lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from glyphshield.codepoints import format_cp, parse_cp
from glyphshield.errors import CheckpointError, UnknownCodepoint
from glyphshield.storage import read_container, write_container

SpaceKind = Literal["ices", "i2ces"]
LayerChoice = Literal["conv", "linear"]
AveChoice = Literal["single", "ave"]


class SpaceBuildMeta(BaseModel):
    """How an embedding space was built.

    Args:
        font_name: Font used for the renders.
        canvas: (width, height) of the renders.
        size_pt: Font size of the renders.
        checkpoint_id: Glyph-classifier checkpoint id (I2CES only).
        layer_choice: Extraction point (I2CES only).
        ave_choice: Single probe or rotation average (I2CES only).
        skipped: Codepoints left out, "U+XXXX" -> reason.

    Plain meaning: The recipe behind a character space.
    """

    font_name: str = ""
    canvas: tuple[int, int] = (0, 0)
    size_pt: int = 0
    checkpoint_id: Optional[str] = None
    layer_choice: Optional[LayerChoice] = None
    ave_choice: Optional[AveChoice] = None
    skipped: dict[str, str] = Field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class EmbeddingSpace:
    """Codepoint -> dense vector map, stored as a matrix in codepoint order.

    Vectors are kept unnormalized; cosine normalizes at query time.

    Args:
        kind: "ices" (pixel flatten) or "i2ces" (CNN features).
        dim: Vector length.
        codepoints: Ascending codepoints, one per matrix row.
        matrix: len(codepoints) x dim float32 array.
        build_meta: Build provenance.

    Plain meaning: Every character as a list of numbers.
    """

    kind: SpaceKind
    dim: int
    codepoints: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)
    build_meta: SpaceBuildMeta = field(default_factory=SpaceBuildMeta)

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.matrix.shape != (len(self.codepoints), self.dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{len(self.codepoints)} x {self.dim}"
            )
        if list(self.codepoints) != sorted(set(self.codepoints)):
            raise ValueError("codepoints must be unique and ascending")
        if self.matrix.size and not np.all(np.any(self.matrix != 0, axis=1)):
            raise ValueError("embedding spaces cannot hold all-zero vectors")
        if self.kind == "ices":
            width, height = self.build_meta.canvas
            if width * height != self.dim:
                raise ValueError(f"ICES dim {self.dim} != canvas area {width * height}")
        index = {cp: i for i, cp in enumerate(self.codepoints)}
        object.__setattr__(self, "_index", index)
        self.matrix.setflags(write=False)

    def __len__(self) -> int:
        return len(self.codepoints)

    def __contains__(self, cp: object) -> bool:
        return cp in self._index  # type: ignore[attr-defined]

    def index_of(self, cp: int) -> int:
        try:
            return self._index[cp]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownCodepoint(cp) from None

    def vector(self, cp: int) -> np.ndarray:
        return self.matrix[self.index_of(cp)]

    def save(self, path: Union[str, Path]) -> Path:
        """Persist as JSON header plus little-endian float32 matrix."""
        header = {
            "format": "glyphshield.space/1",
            "kind": self.kind,
            "dim": self.dim,
            "build_meta": self.build_meta.model_dump(mode="json"),
            "codepoints": [format_cp(cp) for cp in self.codepoints],
        }
        return write_container(path, header, [("matrix", self.matrix)])

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmbeddingSpace":
        header, blobs = read_container(path)
        if header.get("format") != "glyphshield.space/1":
            raise CheckpointError(f"{path} is not an embedding space file")
        return cls(
            kind=header["kind"],
            dim=int(header["dim"]),
            codepoints=tuple(parse_cp(cp) for cp in header["codepoints"]),
            matrix=blobs["matrix"].reshape(
                len(header["codepoints"]), int(header["dim"])
            ),
            build_meta=SpaceBuildMeta.model_validate(header["build_meta"]),
        )


@dataclass(frozen=True)
class NeighborSet:
    """Ranked visually-similar replacements for one codepoint.

    Invariants: the codepoint itself is excluded, neighbors are unique,
    similarities lie in [-1, 1] and never increase along the list.

    Plain meaning: One character's look-alikes, best first.
    """

    codepoint: int
    neighbors: tuple[int, ...] = ()
    similarities: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.neighbors) != len(self.similarities):
            raise ValueError("neighbors and similarities must have equal length")
        if self.codepoint in self.neighbors:
            raise ValueError(f"{format_cp(self.codepoint)} lists itself as a neighbor")
        if len(set(self.neighbors)) != len(self.neighbors):
            raise ValueError("neighbors must be unique")
        sims = self.similarities
        if any(not -1.0 <= s <= 1.0 for s in sims):
            raise ValueError("similarities must lie in [-1, 1]")
        if any(sims[i] < sims[i + 1] for i in range(len(sims) - 1)):
            raise ValueError("similarities must be non-increasing")

    def __len__(self) -> int:
        return len(self.neighbors)

    def above(self, threshold: float) -> tuple[int, ...]:
        """Neighbors with similarity >= threshold."""
        pairs = zip(self.neighbors, self.similarities)
        return tuple(n for n, s in pairs if s >= threshold)

    def to_dict(self) -> dict:
        return {
            "codepoint": format_cp(self.codepoint),
            "neighbors": [format_cp(cp) for cp in self.neighbors],
            "similarities": [float(s) for s in self.similarities],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "NeighborSet":
        return cls(
            codepoint=parse_cp(data["codepoint"]),
            neighbors=tuple(parse_cp(cp) for cp in data["neighbors"]),
            similarities=tuple(float(s) for s in data["similarities"]),
        )


def save_neighbor_sets(path: Union[str, Path], sets: Sequence[NeighborSet]) -> Path:
    """Write neighbor sets as a JSON list, one object per codepoint."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = [ns.to_dict() for ns in sorted(sets, key=lambda ns: ns.codepoint)]
    target.write_text(
        json.dumps(payload, indent=2, ensure_ascii=True) + "\n", encoding="utf-8"
    )
    return target


def load_neighbor_sets(path: Union[str, Path]) -> dict[int, NeighborSet]:
    """Read a JSON list written by save_neighbor_sets."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    sets = (NeighborSet.from_dict(item) for item in data)
    return {ns.codepoint: ns for ns in sets}
