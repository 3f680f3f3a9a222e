"""CNN-feature character space (I2CES).

Plain meaning: Describe each character by what the trained glyph reader sees.
"""

from __future__ import annotations

import logging
from typing import Iterable, Literal, Optional

import numpy as np

from glyphshield.classifier import (
    GlyphClassifierCheckpoint,
    LayerChoice,
    canonical_probe,
    extract_embeddings,
)
from glyphshield.codepoints import format_cp
from glyphshield.errors import EmptySpace, NotRenderable
from glyphshield.raster import (
    CLASSIFIER_CANVAS,
    DEFAULT_ROTATIONS,
    PRIMARY_FONT_FILE,
    PROBE_SIZE_PT,
    AugmentationSpec,
    FontFace,
    load_font_set,
    render_view,
)
from glyphshield.spaces.models import EmbeddingSpace, SpaceBuildMeta

logger = logging.getLogger(__name__)

AveChoice = Literal["single", "ave"]


def probe_spec(font: FontFace, seed: int = 0) -> AugmentationSpec:
    """The 20 rotated, noise-free 80pt views averaged by the "ave" choice."""
    return AugmentationSpec(
        fonts=[font.id],
        sizes_pt=[PROBE_SIZE_PT],
        rotation_deg=list(DEFAULT_ROTATIONS),
        noise_density=0.0,
        canvas=CLASSIFIER_CANVAS,
        seed=seed,
    )


def i2ces_vector(
    cp: int,
    ckpt: GlyphClassifierCheckpoint,
    font: FontFace,
    layer_choice: LayerChoice = "conv",
    ave_choice: AveChoice = "single",
    spec: Optional[AugmentationSpec] = None,
) -> np.ndarray:
    """Embedding of one character from its probe render(s)."""
    base = canonical_probe(cp, font)
    if ave_choice == "single":
        return extract_embeddings(ckpt, [base], layer_choice)[0]
    if ave_choice != "ave":
        raise ValueError(f"unknown ave choice {ave_choice!r}")
    views_spec = spec or probe_spec(font)
    views = [
        render_view(base, font, views_spec, i)
        for i in range(len(views_spec.rotation_deg))
    ]
    return extract_embeddings(ckpt, views, layer_choice).mean(axis=0)


def build_i2ces(
    charset: Iterable[int],
    classifier: GlyphClassifierCheckpoint,
    layer_choice: LayerChoice = "conv",
    ave_choice: AveChoice = "single",
    font: Optional[FontFace] = None,
    spec: Optional[AugmentationSpec] = None,
) -> EmbeddingSpace:
    """Build an I2CES space from a trained glyph classifier.

    Args:
        charset: Codepoints to embed; all must be classifier classes.
        classifier: Trained glyph-classifier checkpoint.
        layer_choice: "conv" (flattened final-conv block) or "linear" (logits).
        ave_choice: "single" (canonical probe) or "ave" (mean over the
            rotated probe views).
        font: Probe font (default: DejaVu Sans).
        spec: Rotated-view product for "ave" (default: the 20 training
            angles at 80pt).

    Raises:
        UnknownCodepoint: A codepoint was not a training class.
        EmptySpace: Nothing could be embedded.

    Example:
        >>> space = build_i2ces(ckpt.charset, ckpt)
        >>> space.dim
        1152

    Plain meaning: Ask the glyph reader what each character looks like.
    """
    cps = sorted(set(charset))
    for cp in cps:
        classifier.class_index(cp)
    if not cps:
        raise EmptySpace("charset is empty")
    probe_font = font or load_font_set([PRIMARY_FONT_FILE]).primary

    kept: list[int] = []
    rows: list[np.ndarray] = []
    skipped: dict[str, str] = {}
    for cp in cps:
        try:
            vector = i2ces_vector(
                cp, classifier, probe_font, layer_choice, ave_choice, spec
            )
        except NotRenderable as exc:
            skipped[format_cp(cp)] = "unrenderable"
            logger.warning("Skipping %s: %s", format_cp(cp), exc)
            continue
        if not np.any(vector):
            skipped[format_cp(cp)] = "zero"
            logger.warning("Skipping %s: all-zero embedding", format_cp(cp))
            continue
        kept.append(cp)
        rows.append(vector)

    if not kept:
        raise EmptySpace("no codepoint produced an embedding")
    width, height = CLASSIFIER_CANVAS
    logger.info(
        "Built I2CES space (%s, %s): %d entries", layer_choice, ave_choice, len(kept)
    )
    return EmbeddingSpace(
        kind="i2ces",
        dim=rows[0].shape[0],
        codepoints=tuple(kept),
        matrix=np.stack(rows).astype(np.float32),
        build_meta=SpaceBuildMeta(
            font_name=probe_font.name,
            canvas=(width, height),
            size_pt=PROBE_SIZE_PT,
            checkpoint_id=classifier.checkpoint_id,
            layer_choice=layer_choice,
            ave_choice=ave_choice,
            skipped=skipped,
        ),
    )
