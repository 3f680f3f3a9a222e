"""Pixel-flatten character space (ICES).

Plain meaning: Describe each character by the raw pixels of a small picture.
"""

from __future__ import annotations

import logging
from typing import Iterable

import numpy as np

from glyphshield.codepoints import format_cp
from glyphshield.errors import BlankGlyph, EmptySpace, NotRenderable
from glyphshield.raster import ICES_CANVAS, ICES_SIZE_PT, FontFace, rasterize_centered
from glyphshield.spaces.models import EmbeddingSpace, SpaceBuildMeta

logger = logging.getLogger(__name__)


def ices_vector(
    cp: int,
    font: FontFace,
    canvas: tuple[int, int] = ICES_CANVAS,
    size_pt: int = ICES_SIZE_PT,
) -> np.ndarray:
    """Row-major flatten of one centered render (576 entries at 24x24)."""
    return rasterize_centered(cp, font, size_pt, canvas).flatten()


def build_ices(
    charset: Iterable[int],
    font: FontFace,
    canvas: tuple[int, int] = ICES_CANVAS,
    size_pt: int = ICES_SIZE_PT,
) -> EmbeddingSpace:
    """Build an ICES space from centered renders of a charset.

    Args:
        charset: Codepoints to embed.
        font: Font to render with.
        canvas: Render canvas (24x24 gives 576 dimensions).
        size_pt: Render size; oversize glyphs are fitted to the canvas.

    Returns:
        EmbeddingSpace of kind "ices". Blank and unrenderable codepoints
        are omitted and listed in build_meta.skipped.

    Raises:
        EmptySpace: If no codepoint survives.

    Example:
        >>> space = build_ices(letters(), dejavu)
        >>> space.dim
        576

    Plain meaning: Turn each character's picture into a vector of pixels.
    """
    cps = sorted(set(charset))
    if not cps:
        raise EmptySpace("charset is empty")

    kept: list[int] = []
    rows: list[np.ndarray] = []
    skipped: dict[str, str] = {}
    for cp in cps:
        try:
            rows.append(ices_vector(cp, font, canvas, size_pt))
        except BlankGlyph:
            skipped[format_cp(cp)] = "blank"
            logger.warning("Skipping %s: renders blank", format_cp(cp))
            continue
        except NotRenderable:
            skipped[format_cp(cp)] = "unrenderable"
            logger.warning("Skipping %s: not in %s", format_cp(cp), font.name)
            continue
        kept.append(cp)

    if not kept:
        raise EmptySpace(f"none of {len(cps)} codepoints rendered with ink")

    width, height = canvas
    logger.info("Built ICES space: %d entries, %d skipped", len(kept), len(skipped))
    return EmbeddingSpace(
        kind="ices",
        dim=width * height,
        codepoints=tuple(kept),
        matrix=np.stack(rows).astype(np.float32),
        build_meta=SpaceBuildMeta(
            font_name=font.name, canvas=canvas, size_pt=size_pt, skipped=skipped
        ),
    )
