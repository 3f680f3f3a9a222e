"""
Character encoders for text models.

One-hot rows for the Char-CNN, rendered-glyph rows for the vision-based
model (a small 2D CNN over each character's picture, trained jointly) and
fixed pixel rows for the ICES-based model. Every encoder maps a character
it cannot handle to an all-zero row.

Plain meaning: Turn each character of a text into a row of numbers.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from glyphshield.errors import NoForwardState
from glyphshield.nn.layers import Conv2DSpec, FlattenSpec, MaxPool2DSpec, ReLUSpec
from glyphshield.nn.network import Network
from glyphshield.raster import (
    ICES_CANVAS,
    ICES_SIZE_PT,
    PRIMARY_FONT_FILE,
    FontFace,
    GlyphCache,
    load_font_set,
)
from glyphshield.text.vocab import UNKNOWN, Vocabulary

logger = logging.getLogger(__name__)

VB_CANVAS = (32, 32)
VB_SIZE_PT = 24
GLYPH_ENCODER_CHANNELS = (8, 16, 32)


def encode_onehot(text: str, vocab: Vocabulary) -> np.ndarray:
    """One-hot matrix of a text: max_len x |vocab|, zero rows for unknowns.

    Example:
        >>> encode_onehot("ab", Vocabulary(chars=("a", "b"), max_len=4)).tolist()
        [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]
    """
    indices = vocab.indices(text)
    out = np.zeros((vocab.max_len, vocab.size), dtype=np.float32)
    known = np.flatnonzero(indices != UNKNOWN)
    out[known, indices[known]] = 1.0
    return out


def onehot_batch(texts: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    """N x |vocab| x max_len batch (channels first, for Conv1D)."""
    batch = np.zeros((len(texts), vocab.size, vocab.max_len), dtype=np.float32)
    for row, text in enumerate(texts):
        batch[row] = encode_onehot(text, vocab).T
    return batch


class RenderConfig(BaseModel):
    """How characters are drawn for image-based encoders.

    Plain meaning: Font, size and canvas of the character pictures.
    """

    model_config = ConfigDict(frozen=True)

    font_file: str = PRIMARY_FONT_FILE
    canvas: tuple[int, int] = VB_CANVAS
    size_pt: int = Field(default=VB_SIZE_PT, gt=0)


def resolve_render_font(config: RenderConfig) -> FontFace:
    return load_font_set([config.font_file]).primary


def _text_codepoints(texts: Sequence[str], max_len: int) -> list[list[int]]:
    return [[ord(ch) for ch in text[:max_len]] for text in texts]


class ImageTable:
    """Cached glyph pictures for image-based encoders, keyed by codepoint.

    Plain meaning: A shared sketchbook of every character seen so far.
    """

    def __init__(self, config: RenderConfig, font: Optional[FontFace] = None):
        self.config = config
        self.font = font or resolve_render_font(config)
        self.cache = GlyphCache(self.font, config.size_pt, config.canvas)

    def pixels(self, cp: int) -> Optional[np.ndarray]:
        bitmap = self.cache.get(cp)
        return None if bitmap is None else bitmap.pixels


def glyph_encoder_specs() -> list:
    """conv-pool-conv-pool-conv, flattened (2048 wide on 32 x 32 input)."""
    c1, c2, c3 = GLYPH_ENCODER_CHANNELS
    return [
        Conv2DSpec(out_channels=c1, kernel_h=3, kernel_w=3, padding=1),
        ReLUSpec(),
        MaxPool2DSpec(),
        Conv2DSpec(out_channels=c2, kernel_h=3, kernel_w=3, padding=1),
        ReLUSpec(),
        MaxPool2DSpec(),
        Conv2DSpec(out_channels=c3, kernel_h=3, kernel_w=3, padding=1),
        FlattenSpec(),
    ]


def glyph_encoder_network(
    canvas: tuple[int, int] = VB_CANVAS, seed: int = 0, dtype=np.float32
) -> Network:
    width, height = canvas
    return Network(glyph_encoder_specs(), (1, height, width), seed=seed, dtype=dtype)


class VisualEncoder:
    """Jointly trained glyph encoder of the vision-based model.

    Each distinct character of a batch is rendered and encoded once; the
    embeddings are gathered into N x E x L, and gradients are summed back
    per character on the way down.

    Plain meaning: Read each character's picture to get its embedding.
    """

    def __init__(self, images: ImageTable, network: Network):
        self.images = images
        self.network = network
        self._state: Optional[tuple[np.ndarray, np.ndarray, int]] = None

    @property
    def dim(self) -> int:
        return self.network.output_shape[0]

    def _unique(self, codes: list[list[int]]) -> tuple[list[int], np.ndarray]:
        renderable = sorted(
            {cp for row in codes for cp in row if self.images.pixels(cp) is not None}
        )
        if not renderable:
            return [], np.zeros((0, 1) + self.network.input_shape[1:], dtype=np.float32)
        stack = np.stack([self.images.pixels(cp) for cp in renderable])[:, None, :, :]
        return renderable, stack

    def encode_batch(self, texts: Sequence[str], max_len: int) -> np.ndarray:
        """N x E x max_len embeddings; keeps state for backward."""
        codes = _text_codepoints(texts, max_len)
        chars, images = self._unique(codes)
        slot = {cp: i for i, cp in enumerate(chars)}
        # Row index into the unique table; -1 is a zero row.
        gather = np.full((len(texts), max_len), -1, dtype=np.int64)
        for row, text_codes in enumerate(codes):
            for position, cp in enumerate(text_codes):
                gather[row, position] = slot.get(cp, -1)

        dtype = self.network.dtype
        if chars:
            unique = self.network.forward(images)
        else:
            unique = np.zeros((0, self.dim), dtype=dtype)
        table = np.vstack([unique, np.zeros((1, self.dim), dtype=dtype)])
        out = table[gather].transpose(0, 2, 1)
        self._state = (gather, images, len(chars))
        return np.ascontiguousarray(out)

    def backward(self, grad: np.ndarray) -> None:
        """Push N x E x L gradients into the glyph encoder's parameters."""
        if self._state is None:
            raise NoForwardState("VisualEncoder.backward needs encode_batch first")
        gather, _, n_unique = self._state
        self._state = None
        if n_unique == 0:
            for layer in self.network.layers:
                layer.grads = {k: np.zeros_like(v) for k, v in layer.params.items()}
            return
        per_position = grad.transpose(0, 2, 1).reshape(-1, self.dim)
        index = gather.reshape(-1)
        d_table = np.zeros((n_unique + 1, self.dim), dtype=grad.dtype)
        np.add.at(d_table, index, per_position)
        self.network.backward(d_table[:n_unique])

    def embed(self, cps: Sequence[int]) -> np.ndarray:
        """Encoder embeddings of codepoints (zero rows when unrenderable)."""
        out = np.zeros((len(cps), self.dim), dtype=np.float32)
        rows = [(i, self.images.pixels(cp)) for i, cp in enumerate(cps)]
        present = [(i, px) for i, px in rows if px is not None]
        if present:
            stack = np.stack([px for _, px in present])[:, None, :, :]
            vectors = self.network.predict(stack)
            for (i, _), vector in zip(present, vectors):
                out[i] = vector
        return out


def encode_visual(text: str, encoder: VisualEncoder, max_len: int) -> np.ndarray:
    """max_len x E embedding matrix of one text.

    Characters that are blank or missing from the render font (and padding)
    give all-zero rows.
    """
    codes = [ord(ch) for ch in text[:max_len]]
    out = np.zeros((max_len, encoder.dim), dtype=np.float32)
    if codes:
        out[: len(codes)] = encoder.embed(codes)
    return out


class IcesEncoder:
    """Fixed 576-wide pixel rows (24 x 24 renders) for the ICES-based model.

    Plain meaning: Use each character's raw pixels as its embedding.
    """

    def __init__(self, images: ImageTable):
        self.images = images
        width, height = images.config.canvas
        self.dim = width * height

    def encode_batch(self, texts: Sequence[str], max_len: int) -> np.ndarray:
        out = np.zeros((len(texts), self.dim, max_len), dtype=np.float32)
        for row, text in enumerate(texts):
            for position, ch in enumerate(text[:max_len]):
                pixels = self.images.pixels(ord(ch))
                if pixels is not None:
                    out[row, :, position] = pixels.reshape(-1)
        return out


def ices_render_config(font_file: str = PRIMARY_FONT_FILE) -> RenderConfig:
    return RenderConfig(font_file=font_file, canvas=ICES_CANVAS, size_pt=ICES_SIZE_PT)
