"""Exception hierarchy for glyphshield.

Each subsystem raises its own family of errors so callers can catch as
broadly or narrowly as they need. Everything derives from GlyphShieldError,
which is what the CLI traps and reports.

Plain meaning: All the ways a glyphshield operation can fail, by name.
"""

from __future__ import annotations

from typing import Any, Optional


class GlyphShieldError(Exception):
    """Base class for every error raised by glyphshield.

    Plain meaning: Something in the toolkit went wrong.
    """


# ----------------------------------------------------------------------------
# Glyph rasterization
# ----------------------------------------------------------------------------


class RasterError(GlyphShieldError):
    """Raised when a font cannot be loaded or a glyph cannot be rendered."""


class FileUnreadable(RasterError):
    """The font path does not exist or cannot be read."""


class NotAFont(RasterError):
    """The file parses as neither TrueType nor OpenType."""


class NotRenderable(RasterError):
    """The font has no outline for the requested codepoint.

    Args:
        codepoint: The codepoint that could not be rendered.
        font_id: Id of the font that lacks the glyph, if known.
    """

    def __init__(self, message: str, codepoint: int, font_id: Optional[int] = None):
        super().__init__(message)
        self.codepoint = codepoint
        self.font_id = font_id


class BlankGlyph(NotRenderable):
    """The glyph rasterizes to an image without any ink."""


class GlyphOverflow(RasterError):
    """The glyph ink does not fit the requested canvas."""


class RotationOutOfRange(RasterError, ValueError):
    """Rotation angle exceeds the toolkit limit of 45 degrees."""


# ----------------------------------------------------------------------------
# Embedding spaces and names
# ----------------------------------------------------------------------------


class SpaceError(GlyphShieldError):
    """Raised by embedding-space construction and queries."""


class EmptySpace(SpaceError):
    """No codepoint survived filtering while building a space."""


class UnknownCodepoint(SpaceError, KeyError):
    """The codepoint is not part of the space or classifier charset."""

    def __init__(self, codepoint: int):
        super().__init__(f"U+{codepoint:04X} is not in the space")
        self.codepoint = codepoint

    def __str__(self) -> str:
        return f"U+{self.codepoint:04X} is not in the space"


class ZeroVector(SpaceError, ValueError):
    """Cosine similarity requested for an all-zero vector."""


class LengthMismatch(SpaceError, ValueError):
    """Vectors of different lengths were compared."""


class NamesError(GlyphShieldError):
    """Raised while reading Unicode names data or applying the DCES rule."""


class MalformedLine(NamesError):
    """A names-data line does not follow the UnicodeData.txt layout."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NoCaseToken(NamesError):
    """The character name has neither a SMALL nor a CAPITAL token."""


class NoBaseLetter(NamesError):
    """The character name has no single-letter A-Z token."""


class NamesFetchError(NamesError):
    """The names data file could not be downloaded."""


# ----------------------------------------------------------------------------
# Neural network engine
# ----------------------------------------------------------------------------


class EngineError(GlyphShieldError):
    """Raised by the tensor/network engine."""


class ShapeMismatch(EngineError, ValueError):
    """Tensor shapes do not compose."""


class OddDimension(EngineError, ValueError):
    """Pooling input dimension is not divisible by the pool size."""


class LabelOutOfRange(EngineError, ValueError):
    """A class label falls outside [0, K)."""


class NoForwardState(EngineError):
    """backward() was called without a recorded forward pass."""


class CheckpointError(EngineError):
    """A checkpoint file is unreadable or inconsistent."""


# ----------------------------------------------------------------------------
# Glyph classifier
# ----------------------------------------------------------------------------


class ClassifierError(GlyphShieldError):
    """Raised by glyph dataset construction and classifier training."""


class EmptyCharset(ClassifierError):
    """No codepoint survived renderability filtering."""


class InvalidSplit(ClassifierError, ValueError):
    """The requested validation fraction cannot produce a train/val split."""


class DidNotConverge(ClassifierError):
    """Training reached max_epochs without exceeding the target accuracy.

    Args:
        checkpoint: The best checkpoint found, flagged as not converged.
    """

    def __init__(self, message: str, checkpoint: Any):
        super().__init__(message)
        self.checkpoint = checkpoint


class WrongCanvas(ClassifierError, ValueError):
    """A bitmap does not match the classifier's input canvas."""


# ----------------------------------------------------------------------------
# Text models and datasets
# ----------------------------------------------------------------------------


class TextModelError(GlyphShieldError):
    """Raised by text datasets, text models and evaluation."""


class InvalidDataset(TextModelError, ValueError):
    """A dataset is empty or has fewer than two classes."""


class ClassCountMismatch(TextModelError, ValueError):
    """Dataset labels do not fit the model's class count."""


class EmptyDataset(TextModelError, ValueError):
    """Evaluation was requested on an empty dataset."""


class MalformedCSV(TextModelError):
    """A dataset CSV row cannot be parsed."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InsufficientSamples(TextModelError):
    """A stratified subsample asks for more rows than a class provides."""


# ----------------------------------------------------------------------------
# Attack and experiments
# ----------------------------------------------------------------------------


class AttackError(GlyphShieldError):
    """Raised by h_set management and the split protocol."""


class MalformedHSetFile(AttackError):
    """An h_set file is structurally or semantically invalid."""


class LeakageError(AttackError):
    """Train-half and eval-half neighbor sets overlap for some codepoint."""


class ConfigError(GlyphShieldError):
    """A configuration file is invalid.

    Args:
        message: Description of the problem.
        field: Dotted path of the offending field ("<root>" if global).
    """

    def __init__(self, message: str, field: str = "<root>"):
        super().__init__(f"{field}: {message}")
        self.field = field
