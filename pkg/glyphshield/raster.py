"""
Glyph rasterization and augmentation.

Fonts are parsed with fontTools (coverage and style flags) and drawn with
Pillow's FreeType renderer. Every render is cropped to its ink and pasted
centered on the requested canvas; augmentation then rotates the centered
render about the canvas center and sprinkles salt-and-pepper noise.

Plain meaning: Turn a character and a font into a clean, centered picture.
"""

from __future__ import annotations

import itertools
import logging
import threading
import zlib
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np
from fontTools.ttLib import TTFont, TTLibError
from PIL import Image, ImageDraw, ImageFont
from pydantic import BaseModel, Field, field_validator

from glyphshield.errors import (
    BlankGlyph,
    FileUnreadable,
    GlyphOverflow,
    NotAFont,
    NotRenderable,
    RotationOutOfRange,
)

logger = logging.getLogger(__name__)

MAX_ROTATION_DEG = 45.0
FIT_MARGIN = 2

CLASSIFIER_CANVAS = (100, 100)
PROBE_SIZE_PT = 80
ICES_CANVAS = (24, 24)
ICES_SIZE_PT = 20

DEFAULT_SIZES_PT = (60, 80)
# -20..20 step 2 without the unrotated view: 20 angles per font and size.
DEFAULT_ROTATIONS = tuple(float(a) for a in range(-20, 21, 2) if a != 0)
DEFAULT_NOISE_DENSITY = 0.02

PRIMARY_FONT_FILE = "DejaVuSans.ttf"
DEFAULT_FONT_FILES = (
    "DejaVuSans.ttf",
    "DejaVuSans-Bold.ttf",
    "DejaVuSans-Oblique.ttf",
    "DejaVuSans-BoldOblique.ttf",
    "DejaVuSans-ExtraLight.ttf",
    "DejaVuSansCondensed.ttf",
    "DejaVuSansCondensed-Bold.ttf",
    "DejaVuSansCondensed-Oblique.ttf",
)
DEFAULT_FONT_DIRS = (
    "/usr/share/fonts",
    "/usr/local/share/fonts",
    "~/.local/share/fonts",
    "~/.fonts",
    "/Library/Fonts",
    "/System/Library/Fonts",
    "C:/Windows/Fonts",
)

_font_ids = itertools.count()


@dataclass(frozen=True)
class FontFace:
    """A loaded scalable font.

    Args:
        id: Process-unique font id.
        name: Full font name from the name table.
        source_path: Absolute path of the font file.
        bold: Font declares a bold weight.
        oblique: Font declares an italic/oblique slant.
        codepoints: Codepoints covered by the font's Unicode cmap.

    Plain meaning: One font file, ready to draw characters with.
    """

    id: int
    name: str
    source_path: str
    bold: bool = False
    oblique: bool = False
    codepoints: frozenset[int] = field(default_factory=frozenset, repr=False)

    @property
    def style(self) -> frozenset[str]:
        flags = set()
        if self.bold:
            flags.add("bold")
        if self.oblique:
            flags.add("oblique")
        return frozenset(flags)

    @property
    def key(self) -> int:
        """Stable fingerprint of the face, independent of load order."""
        return zlib.crc32(self.name.encode("utf-8"))

    def has_glyph(self, cp: int) -> bool:
        return cp in self.codepoints


class FontSet:
    """Ordered collection of fonts addressed by id.

    Plain meaning: The fonts used to draw augmented training views.
    """

    def __init__(self, fonts: Iterable[FontFace]):
        self._fonts = list(fonts)
        self._by_id = {font.id: font for font in self._fonts}
        if len(self._by_id) != len(self._fonts):
            raise ValueError("font ids must be unique within a FontSet")

    def __iter__(self) -> Iterator[FontFace]:
        return iter(self._fonts)

    def __len__(self) -> int:
        return len(self._fonts)

    @property
    def ids(self) -> list[int]:
        return [font.id for font in self._fonts]

    @property
    def primary(self) -> FontFace:
        """The first font of the set (DejaVu Sans for default sets)."""
        return self._fonts[0]

    def get(self, font_id: int) -> FontFace:
        try:
            return self._by_id[font_id]
        except KeyError:
            raise KeyError(f"font id {font_id} is not in this FontSet") from None


@dataclass(frozen=True, eq=False)
class GlyphBitmap:
    """A rasterized grayscale glyph with its render provenance.

    Args:
        codepoint: Rendered Unicode scalar.
        width: Canvas width in pixels.
        height: Canvas height in pixels.
        pixels: height x width float32 intensities in [0, 1].
        font_id: Id of the font the glyph was drawn with.
        size_pt: Font size (one point is one pixel).
        rotation_deg: Rotation applied after centering.
        noise_seed: Seed of the salt-and-pepper noise, if any.

    Plain meaning: A character picture plus how it was made.
    """

    codepoint: int
    width: int
    height: int
    pixels: np.ndarray = field(repr=False)
    font_id: int = -1
    size_pt: int = 0
    rotation_deg: float = 0.0
    noise_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixels shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}"
            )
        self.pixels.setflags(write=False)

    def flatten(self) -> np.ndarray:
        """Row-major vector of width x height intensities."""
        return self.pixels.reshape(-1).copy()

    def ink_mass(self) -> float:
        return float(self.pixels.sum(dtype=np.float64))

    def ink_bbox(self) -> Optional[tuple[int, int, int, int]]:
        """(top, left, bottom, right) of non-zero pixels, inclusive."""
        rows = np.flatnonzero(self.pixels.any(axis=1))
        cols = np.flatnonzero(self.pixels.any(axis=0))
        if rows.size == 0:
            return None
        return int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1])


class AugmentationSpec(BaseModel):
    """Augmentation product for glyph-classifier training views.

    Args:
        fonts: Font ids (from a FontSet) to render with.
        sizes_pt: Font sizes.
        rotation_deg: Rotation angles applied after centering.
        noise_density: Salt-and-pepper probability per pixel.
        canvas: (width, height) of each view.
        seed: Base seed for the per-view noise.

    Example:
        >>> AugmentationSpec(fonts=font_set.ids)  # 8 x 2 x 20 = 320 views

    Plain meaning: Which fonts, sizes and angles to draw each character in.
    """

    fonts: list[int] = Field(..., min_length=1)
    sizes_pt: list[int] = Field(
        default_factory=lambda: list(DEFAULT_SIZES_PT), min_length=1
    )
    rotation_deg: list[float] = Field(
        default_factory=lambda: list(DEFAULT_ROTATIONS), min_length=1
    )
    noise_density: float = Field(default=DEFAULT_NOISE_DENSITY, ge=0.0, le=1.0)
    canvas: tuple[int, int] = CLASSIFIER_CANVAS
    seed: int = 0

    @field_validator("sizes_pt")
    @classmethod
    def _positive_sizes(cls, value: list[int]) -> list[int]:
        if any(size <= 0 for size in value):
            raise ValueError("font sizes must be positive")
        return value

    @field_validator("rotation_deg")
    @classmethod
    def _bounded_rotations(cls, value: list[float]) -> list[float]:
        if any(abs(angle) > MAX_ROTATION_DEG for angle in value):
            raise ValueError(f"rotations must lie within +/-{MAX_ROTATION_DEG}")
        return value

    @property
    def views_per_font(self) -> int:
        return len(self.sizes_pt) * len(self.rotation_deg)

    @property
    def views_per_char(self) -> int:
        return len(self.fonts) * self.views_per_font


# ----------------------------------------------------------------------------
# Fonts
# ----------------------------------------------------------------------------


def load_font(path: Union[str, Path]) -> FontFace:
    """Load a TrueType or OpenType font file.

    Args:
        path: Font file path.

    Returns:
        FontFace with a fresh id, its cmap coverage and style flags.

    Raises:
        FileUnreadable: If the path is missing or unreadable.
        NotAFont: If the file is not a scalable font with a Unicode cmap.

    Example:
        >>> face = load_font("/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf")

    Plain meaning: Open a font file and learn which characters it can draw.
    """
    source = Path(path).expanduser()
    if not source.is_file():
        raise FileUnreadable(f"Font file not found: {source}")
    try:
        with open(source, "rb") as handle:
            handle.read(4)
    except OSError as exc:
        raise FileUnreadable(f"Cannot read font file {source}: {exc}") from exc

    try:
        tt = TTFont(str(source), lazy=True)
    except (TTLibError, OSError, ValueError, AssertionError) as exc:
        raise NotAFont(f"{source} is not a TrueType/OpenType font: {exc}") from exc

    try:
        cmap = tt.getBestCmap()
        name = tt["name"].getDebugName(4) or source.stem
        mac_style = tt["head"].macStyle
        bold = bool(mac_style & 0x01)
        oblique = bool(mac_style & 0x02)
        if "OS/2" in tt:
            fs_selection = tt["OS/2"].fsSelection
            bold = bold or bool(fs_selection & 0x20)
            oblique = oblique or bool(fs_selection & 0x201)
    except Exception as exc:
        raise NotAFont(f"{source} has unreadable font tables: {exc}") from exc
    finally:
        tt.close()

    if not cmap:
        raise NotAFont(f"{source} has no Unicode character map")

    try:
        _pil_font(str(source.resolve()), 12)
    except OSError as exc:
        raise NotAFont(f"FreeType cannot open {source}: {exc}") from exc

    face = FontFace(
        id=next(_font_ids),
        name=name,
        source_path=str(source.resolve()),
        bold=bold,
        oblique=oblique,
        codepoints=frozenset(cmap),
    )
    logger.info("Loaded font %s (%d codepoints)", face.name, len(face.codepoints))
    return face


def find_font_file(
    filename: str, font_dirs: Optional[Sequence[Union[str, Path]]] = None
) -> Optional[Path]:
    """Search font directories (recursively) for a file name.

    Returns:
        The first match, or None when the file is not installed.
    """
    for directory in font_dirs or DEFAULT_FONT_DIRS:
        root = Path(directory).expanduser()
        if not root.is_dir():
            continue
        direct = root / filename
        if direct.is_file():
            return direct
        for candidate in sorted(root.rglob(filename)):
            if candidate.is_file():
                return candidate
    return None


def load_font_set(
    fonts: Optional[Sequence[Union[str, Path]]] = None,
    font_dirs: Optional[Sequence[Union[str, Path]]] = None,
) -> FontSet:
    """Load a FontSet from paths or bare file names.

    The first entry is mandatory and must load; later entries that are
    missing or broken are logged and skipped.

    Args:
        fonts: Paths or file names (default: the eight DejaVu Sans faces).
        font_dirs: Directories searched for bare file names.

    Raises:
        FileUnreadable: If the first font cannot be found.

    Plain meaning: Gather the training fonts, tolerating missing extras.
    """
    entries = list(fonts or DEFAULT_FONT_FILES)
    loaded: list[FontFace] = []
    for index, entry in enumerate(entries):
        candidate = Path(entry).expanduser()
        path = (
            candidate if candidate.is_file() else find_font_file(str(entry), font_dirs)
        )
        try:
            if path is None:
                raise FileUnreadable(f"Font {entry} not found in font directories")
            loaded.append(load_font(path))
        except (FileUnreadable, NotAFont) as exc:
            if index == 0:
                raise
            logger.warning("Skipping font %s: %s", entry, exc)
    return FontSet(loaded)


@lru_cache(maxsize=64)
def _pil_font(path: str, size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.truetype(path, size)


# ----------------------------------------------------------------------------
# Rendering
# ----------------------------------------------------------------------------


def _crop_to_ink(array: np.ndarray) -> Optional[np.ndarray]:
    rows = np.flatnonzero(array.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(array.any(axis=0))
    return array[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]


@lru_cache(maxsize=16384)
def _render_ink(path: str, size_pt: int, cp: int) -> Optional[np.ndarray]:
    font = _pil_font(path, size_pt)
    char = chr(cp)
    left, top, right, bottom = font.getbbox(char)
    pad = size_pt
    width = max(1, right - left) + 2 * pad
    height = max(1, bottom - top) + 2 * pad
    image = Image.new("L", (width, height), 0)
    ImageDraw.Draw(image).text((pad - left, pad - top), char, font=font, fill=255)
    ink = _crop_to_ink(np.asarray(image, dtype=np.uint8))
    if ink is not None:
        ink = ink.copy()
        ink.setflags(write=False)
    return ink


def rasterize_centered(
    cp: int,
    font: FontFace,
    size_pt: int,
    canvas: tuple[int, int] = CLASSIFIER_CANVAS,
    fit: bool = True,
) -> GlyphBitmap:
    """Render one codepoint centered on a blank canvas.

    The ink bounding box is centered (within one pixel). Ink larger than the
    canvas is uniformly downscaled to fit with a 2-pixel margin, or rejected
    with GlyphOverflow when fit is False.

    Args:
        cp: Codepoint to render.
        font: Font to draw with.
        size_pt: Font size.
        canvas: (width, height) of the output.
        fit: Downscale oversize glyphs instead of raising.

    Raises:
        NotRenderable: The font has no glyph for cp.
        BlankGlyph: The glyph draws no ink.
        GlyphOverflow: Ink exceeds the canvas and fit is False.

    Example:
        >>> bitmap = rasterize_centered(ord("b"), face, 80, (100, 100))

    Plain meaning: Draw a character in the middle of an empty square.
    """
    width, height = canvas
    if not font.has_glyph(cp):
        raise NotRenderable(f"{font.name} has no glyph for U+{cp:04X}", cp, font.id)
    ink = _render_ink(font.source_path, size_pt, cp)
    if ink is None:
        raise BlankGlyph(f"U+{cp:04X} renders blank in {font.name}", cp, font.id)

    ink_h, ink_w = ink.shape
    if ink_w > width or ink_h > height:
        if not fit:
            raise GlyphOverflow(
                f"U+{cp:04X} at {size_pt}pt is {ink_w}x{ink_h}, "
                f"canvas is {width}x{height}"
            )
        scale = min((width - 2 * FIT_MARGIN) / ink_w, (height - 2 * FIT_MARGIN) / ink_h)
        new_size = (max(1, int(ink_w * scale)), max(1, int(ink_h * scale)))
        resized = Image.fromarray(np.ascontiguousarray(ink)).resize(
            new_size, Image.Resampling.LANCZOS
        )
        ink = _crop_to_ink(np.asarray(resized, dtype=np.uint8))
        if ink is None:
            raise BlankGlyph(f"U+{cp:04X} vanished when fitted", cp, font.id)
        ink_h, ink_w = ink.shape

    out = np.zeros((height, width), dtype=np.float32)
    top = (height - ink_h) // 2
    left = (width - ink_w) // 2
    out[top : top + ink_h, left : left + ink_w] = ink.astype(np.float32) / 255.0
    return GlyphBitmap(
        codepoint=cp,
        width=width,
        height=height,
        pixels=out,
        font_id=font.id,
        size_pt=size_pt,
    )


def rotate(bitmap: GlyphBitmap, deg: float) -> GlyphBitmap:
    """Rotate a bitmap about its canvas center with bilinear resampling.

    Regions rotated in from outside the frame are filled with 0.

    Raises:
        RotationOutOfRange: If |deg| exceeds 45.
    """
    if abs(deg) > MAX_ROTATION_DEG:
        raise RotationOutOfRange(f"rotation {deg} exceeds +/-{MAX_ROTATION_DEG}")
    if deg == 0:
        return replace(bitmap, pixels=bitmap.pixels.copy())
    image = Image.fromarray(np.ascontiguousarray(bitmap.pixels, dtype=np.float32))
    rotated = image.rotate(deg, resample=Image.Resampling.BILINEAR, fillcolor=0.0)
    pixels = np.clip(np.asarray(rotated, dtype=np.float32), 0.0, 1.0)
    return replace(bitmap, pixels=pixels, rotation_deg=bitmap.rotation_deg + deg)


def add_salt_pepper(bitmap: GlyphBitmap, density: float, seed: int) -> GlyphBitmap:
    """Set each pixel, with probability density, to 0 or 1 (fair coin).

    Deterministic for a fixed seed.

    Raises:
        ValueError: If density lies outside [0, 1].
    """
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"noise density must be in [0, 1], got {density}")
    rng = np.random.default_rng(seed)
    shape = bitmap.pixels.shape
    flip = rng.random(shape) < density
    coin = (rng.random(shape) < 0.5).astype(np.float32)
    pixels = np.where(flip, coin, bitmap.pixels).astype(np.float32)
    return replace(bitmap, pixels=pixels, noise_seed=seed)


def view_seed(
    base_seed: int, cp: int, font: FontFace, size_pt: int, angle_index: int
) -> int:
    """Noise seed of one augmented view, stable across runs and load order."""
    sequence = np.random.SeedSequence([base_seed, cp, font.key, size_pt, angle_index])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def render_view(
    base: GlyphBitmap,
    font: FontFace,
    spec: AugmentationSpec,
    angle_index: int,
) -> GlyphBitmap:
    """Rotate and noise one centered base render per the augmentation spec."""
    angle = spec.rotation_deg[angle_index]
    seed = view_seed(spec.seed, base.codepoint, font, base.size_pt, angle_index)
    return add_salt_pepper(rotate(base, angle), spec.noise_density, seed)


def augment_char(cp: int, fonts: FontSet, spec: AugmentationSpec) -> list[GlyphBitmap]:
    """Render every augmented view of one character.

    Returns:
        len(fonts) x len(sizes) x len(rotations) bitmaps, in that nesting.

    Raises:
        NotRenderable: Propagated (with font_id) for the first failing font.
        BlankGlyph: Propagated (with font_id) for the first blank render.

    Example:
        >>> len(augment_char(ord("b"), font_set, AugmentationSpec(fonts=font_set.ids)))
        320

    Plain meaning: All the training pictures of one character.
    """
    views: list[GlyphBitmap] = []
    for font_id in spec.fonts:
        font = fonts.get(font_id)
        for size in spec.sizes_pt:
            base = rasterize_centered(cp, font, size, spec.canvas)
            for angle_index in range(len(spec.rotation_deg)):
                views.append(render_view(base, font, spec, angle_index))
    return views


def bitmap_to_image(bitmap: GlyphBitmap) -> Image.Image:
    """8-bit grayscale Pillow image of a bitmap."""
    gray = np.round(np.clip(bitmap.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    return Image.fromarray(gray)


def write_pgm(bitmap: GlyphBitmap, path: Union[str, Path]) -> Path:
    """Export a bitmap as binary PGM (P5, maxval 255).

    Side effects:
        Creates parent directories and writes the file.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    bitmap_to_image(bitmap).save(target, format="PPM")
    return target


class GlyphCache:
    """Memoize centered renders per (codepoint, canvas, font, size).

    Misses (unrenderable or blank glyphs) are cached as None. Reads are
    lock-free; insertion happens under a lock so one writer wins.

    Plain meaning: Draw each character once and reuse the picture.
    """

    def __init__(self, font: FontFace, size_pt: int, canvas: tuple[int, int]):
        self.font = font
        self.size_pt = size_pt
        self.canvas = canvas
        self._entries: dict[int, Optional[GlyphBitmap]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, cp: int) -> Optional[GlyphBitmap]:
        if cp in self._entries:
            return self._entries[cp]
        try:
            bitmap: Optional[GlyphBitmap] = rasterize_centered(
                cp, self.font, self.size_pt, self.canvas
            )
        except NotRenderable:
            bitmap = None
        with self._lock:
            return self._entries.setdefault(cp, bitmap)
