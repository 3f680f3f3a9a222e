"""
Glyph classifier: the CNN that learns to recognize characters from pictures.

The network follows the five-block layer list (Conv2d/MaxPool/ReLU blocks
ending in a 128 x 3 x 3 feature map, then two linear layers). Its flattened
final-conv activations are the I2CES character embeddings.

Plain meaning: Teach a network to read single characters, then borrow its eyes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from glyphshield.codepoints import format_cp, parse_cp
from glyphshield.errors import (
    CheckpointError,
    DidNotConverge,
    EmptyCharset,
    InvalidSplit,
    NotRenderable,
    UnknownCodepoint,
    WrongCanvas,
)
from glyphshield.nn.checkpoint import load_checkpoint, save_checkpoint
from glyphshield.nn.layers import (
    Conv2DSpec,
    FlattenSpec,
    LinearSpec,
    MaxPool2DSpec,
    ReLUSpec,
)
from glyphshield.nn.losses import predict_labels, softmax_cross_entropy
from glyphshield.nn.network import Network, layer_index
from glyphshield.nn.optim import SGD
from glyphshield.raster import (
    CLASSIFIER_CANVAS,
    PROBE_SIZE_PT,
    AugmentationSpec,
    FontFace,
    FontSet,
    GlyphBitmap,
    rasterize_centered,
    render_view,
)

logger = logging.getLogger(__name__)

LayerChoice = Literal["conv", "linear"]
Split = Literal["train", "val"]

GLYPH_CNN_CHANNELS = (16, 32, 64, 128, 128)
GLYPH_CNN_HIDDEN = 500


def glyph_cnn_specs(num_classes: int, width_scale: float = 1.0) -> list:
    """The glyph-classifier layer list for 100 x 100 inputs.

    Args:
        num_classes: Output width.
        width_scale: Multiplier on every channel count and the hidden
            width (1.0 gives the full 16/32/64/128/128 and 500 network).
    """
    if num_classes < 1:
        raise ValueError("num_classes must be positive")
    if width_scale <= 0:
        raise ValueError("width_scale must be positive")
    c1, c2, c3, c4, c5 = (max(1, round(c * width_scale)) for c in GLYPH_CNN_CHANNELS)
    hidden = max(1, round(GLYPH_CNN_HIDDEN * width_scale))
    return [
        Conv2DSpec(out_channels=c1, kernel_h=5, kernel_w=5, padding=0),
        MaxPool2DSpec(),
        ReLUSpec(),
        Conv2DSpec(out_channels=c2, kernel_h=3, kernel_w=3, padding=1),
        MaxPool2DSpec(),
        ReLUSpec(),
        Conv2DSpec(out_channels=c3, kernel_h=3, kernel_w=3, padding=1),
        MaxPool2DSpec(),
        ReLUSpec(),
        Conv2DSpec(out_channels=c4, kernel_h=3, kernel_w=3, padding=1),
        MaxPool2DSpec(),
        ReLUSpec(),
        Conv2DSpec(out_channels=c5, kernel_h=3, kernel_w=3, padding=1),
        MaxPool2DSpec(),
        FlattenSpec(),
        LinearSpec(in_features=c5 * 9, out_features=hidden),
        LinearSpec(in_features=hidden, out_features=num_classes),
    ]


def glyph_cnn_network(
    num_classes: int, width_scale: float = 1.0, seed: int = 0, dtype: Any = np.float32
) -> Network:
    """Build the glyph-classifier network on 1 x 100 x 100 inputs.

    Example:
        >>> net = glyph_cnn_network(4378)
        >>> net.shapes[layer_index(net.specs, "flatten")]
        (128, 3, 3)
    """
    width, height = CLASSIFIER_CANVAS
    return Network(
        glyph_cnn_specs(num_classes, width_scale),
        (1, height, width),
        seed=seed,
        dtype=dtype,
    )


# ----------------------------------------------------------------------------
# Dataset
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GlyphSample:
    """One augmented view, described rather than rendered."""

    codepoint: int
    font_id: int
    size_pt: int
    angle_index: int
    label: int
    split: Split


@dataclass
class GlyphDataset:
    """Augmented glyph views with a stratified train/val split.

    Bitmaps are materialized per batch from the cached centered renders;
    rotation and seeded noise are applied on demand, so a sample always
    yields the same pixels.

    Plain meaning: Every training picture of every character, drawn on demand.
    """

    charset: tuple[int, ...]
    samples: list[GlyphSample]
    fonts: FontSet
    spec: AugmentationSpec
    dropped: dict[int, str] = field(default_factory=dict)
    _bases: dict[tuple[int, int, int], GlyphBitmap] = field(
        default_factory=dict, repr=False
    )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def num_classes(self) -> int:
        return len(self.charset)

    def indices(self, split: Split) -> np.ndarray:
        return np.array(
            [i for i, s in enumerate(self.samples) if s.split == split], dtype=np.int64
        )

    def bitmap(self, sample: GlyphSample) -> GlyphBitmap:
        base = self._bases[(sample.codepoint, sample.font_id, sample.size_pt)]
        font = self.fonts.get(sample.font_id)
        return render_view(base, font, self.spec, sample.angle_index)

    def materialize(self, indices: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
        """Render samples into an N x 1 x H x W batch plus labels."""
        chosen = [self.samples[int(i)] for i in indices]
        width, height = self.spec.canvas
        x = np.zeros((len(chosen), 1, height, width), dtype=np.float32)
        labels = np.zeros(len(chosen), dtype=np.int64)
        for row, sample in enumerate(chosen):
            x[row, 0] = self.bitmap(sample).pixels
            labels[row] = sample.label
        return x, labels


def build_glyph_dataset(
    charset: Sequence[int],
    fonts: FontSet,
    spec: AugmentationSpec,
    val_fraction: float = 0.1,
    seed: int = 0,
) -> GlyphDataset:
    """Build the augmented dataset for glyph classification.

    Codepoints that are missing from, or blank in, any font of the spec are
    dropped and reported. Every surviving class gets the full
    fonts x sizes x rotations product of views, split per class into train
    and val with a seeded shuffle.

    Args:
        charset: Codepoints; class index follows this order.
        fonts: Fonts referenced by spec.fonts.
        spec: Augmentation product.
        val_fraction: Share of each class's views held out, in (0, 1).
        seed: Split seed.

    Raises:
        InvalidSplit: val_fraction outside (0, 1), or a class has fewer than
            two views to split.
        EmptyCharset: No codepoint survived filtering.

    Example:
        >>> spec = AugmentationSpec(fonts=fonts.ids)
        >>> ds = build_glyph_dataset(letters(), fonts, spec)
        >>> len(ds) == 52 * 320
        True

    Plain meaning: Draw every character many ways and set some aside for testing.
    """
    if not 0.0 < val_fraction < 1.0:
        raise InvalidSplit(
            f"val_fraction must lie strictly between 0 and 1, got {val_fraction}"
        )
    per_class = spec.views_per_char
    if per_class < 2:
        raise InvalidSplit("each class needs at least two views to split")

    kept: list[int] = []
    dropped: dict[int, str] = {}
    bases: dict[tuple[int, int, int], GlyphBitmap] = {}
    for cp in dict.fromkeys(charset):
        renders: dict[tuple[int, int, int], GlyphBitmap] = {}
        try:
            for font_id in spec.fonts:
                font = fonts.get(font_id)
                for size in spec.sizes_pt:
                    renders[(cp, font_id, size)] = rasterize_centered(
                        cp, font, size, spec.canvas
                    )
        except NotRenderable as exc:
            dropped[cp] = str(exc)
            logger.warning("Dropping %s: %s", format_cp(cp), exc)
            continue
        bases.update(renders)
        kept.append(cp)

    if not kept:
        raise EmptyCharset("no codepoint renders with ink in every font")

    n_val = min(per_class - 1, max(1, round(val_fraction * per_class)))
    samples: list[GlyphSample] = []
    for label, cp in enumerate(kept):
        rng = np.random.default_rng(np.random.SeedSequence([seed, cp]))
        val_slots = set(rng.permutation(per_class)[:n_val].tolist())
        slot = 0
        for font_id in spec.fonts:
            for size in spec.sizes_pt:
                for angle_index in range(len(spec.rotation_deg)):
                    split: Split = "val" if slot in val_slots else "train"
                    samples.append(
                        GlyphSample(cp, font_id, size, angle_index, label, split)
                    )
                    slot += 1

    logger.info(
        "Glyph dataset: %d classes, %d samples (%d val per class), %d dropped",
        len(kept),
        len(samples),
        n_val,
        len(dropped),
    )
    return GlyphDataset(
        charset=tuple(kept),
        samples=samples,
        fonts=fonts,
        spec=spec,
        dropped=dropped,
        _bases=bases,
    )


# ----------------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------------


class GlyphTrainConfig(BaseModel):
    """Glyph-classifier training settings.

    Plain meaning: How long and how fast to train the character reader.
    """

    lr: float = Field(default=0.01, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    batch_size: int = Field(default=64, gt=0)
    max_epochs: int = Field(default=30, ge=0)
    target_acc: float = Field(default=0.90, ge=0.0, le=1.0)
    seed: int = 0
    width_scale: float = Field(default=1.0, gt=0.0)


@dataclass
class GlyphClassifierCheckpoint:
    """A trained glyph classifier and its class order.

    Plain meaning: The character reader, ready to save or use.
    """

    network: Network
    charset: tuple[int, ...]
    val_accuracy: float
    config: GlyphTrainConfig = field(default_factory=GlyphTrainConfig)
    history: list[dict[str, float]] = field(default_factory=list)
    converged: bool = False

    def __post_init__(self) -> None:
        if self.network.output_shape != (len(self.charset),):
            raise CheckpointError(
                f"network has {self.network.output_shape[0]} outputs "
                f"for {len(self.charset)} classes"
            )
        self._index = {cp: i for i, cp in enumerate(self.charset)}

    @property
    def num_classes(self) -> int:
        return len(self.charset)

    @property
    def checkpoint_id(self) -> str:
        """Short content hash of the parameters."""
        digest = hashlib.sha256()
        for name, array in self.network.parameters():
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(array, dtype="<f4").tobytes())
        return digest.hexdigest()[:12]

    def class_index(self, cp: int) -> int:
        try:
            return self._index[cp]
        except KeyError:
            raise UnknownCodepoint(cp) from None

    def save(self, path: Union[str, Path]) -> Path:
        """Write the checkpoint and its `<name>.charset.json` manifest."""
        target = Path(path)
        metadata = {
            "kind": "glyph_classifier",
            "val_accuracy": self.val_accuracy,
            "converged": self.converged,
            "config": self.config.model_dump(),
            "history": self.history,
        }
        save_checkpoint(target, {"classifier": self.network}, metadata)
        manifest = charset_manifest_path(target)
        manifest.write_text(
            json.dumps([format_cp(cp) for cp in self.charset], indent=2) + "\n",
            encoding="utf-8",
        )
        return target

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GlyphClassifierCheckpoint":
        """Load a checkpoint and its charset manifest.

        Raises:
            CheckpointError: Missing files, wrong kind or class-count mismatch.
        """
        source = Path(path)
        networks, metadata = load_checkpoint(source)
        if metadata.get("kind") != "glyph_classifier" or "classifier" not in networks:
            raise CheckpointError(f"{source} is not a glyph-classifier checkpoint")
        manifest = charset_manifest_path(source)
        try:
            charset = tuple(
                parse_cp(cp) for cp in json.loads(manifest.read_text(encoding="utf-8"))
            )
        except (OSError, ValueError) as exc:
            raise CheckpointError(
                f"Cannot read charset manifest {manifest}: {exc}"
            ) from exc
        return cls(
            network=networks["classifier"],
            charset=charset,
            val_accuracy=float(metadata["val_accuracy"]),
            config=GlyphTrainConfig.model_validate(metadata.get("config", {})),
            history=list(metadata.get("history", [])),
            converged=bool(metadata.get("converged", False)),
        )


def charset_manifest_path(path: Union[str, Path]) -> Path:
    target = Path(path)
    return target.with_name(f"{target.stem}.charset.json")


def _accuracy(
    net: Network, ds: GlyphDataset, indices: np.ndarray, batch_size: int
) -> float:
    if indices.size == 0:
        return 0.0
    correct = 0
    for start in range(0, indices.size, batch_size):
        x, labels = ds.materialize(indices[start : start + batch_size])
        correct += int((predict_labels(net.forward(x)) == labels).sum())
    net.clear()
    return correct / indices.size


def train_glyph_classifier(
    ds: GlyphDataset, config: Optional[GlyphTrainConfig] = None
) -> GlyphClassifierCheckpoint:
    """Train the glyph classifier until val accuracy exceeds the target.

    Training stops after the first epoch whose val accuracy is strictly
    above config.target_acc, or after max_epochs. The checkpoint carries the
    parameters of the best val epoch (the untrained network counts as
    epoch 0).

    Raises:
        DidNotConverge: Target never exceeded; the flagged checkpoint is on
            the exception's `checkpoint` attribute.

    Plain meaning: Practice on the pictures until the reader is good enough.
    """
    config = config or GlyphTrainConfig()
    net = glyph_cnn_network(ds.num_classes, config.width_scale, seed=config.seed)
    train_idx = ds.indices("train")
    val_idx = ds.indices("val")
    optimizer = SGD([p for _, p in net.parameters()], config.lr, config.momentum)

    best_acc = _accuracy(net, ds, val_idx, config.batch_size)
    best_params = {name: p.copy() for name, p in net.parameters()}
    history: list[dict[str, float]] = []
    converged = False
    for epoch in range(1, config.max_epochs + 1):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, epoch]))
        order = rng.permutation(train_idx)
        total_loss = 0.0
        for start in range(0, order.size, config.batch_size):
            x, labels = ds.materialize(order[start : start + config.batch_size])
            loss, grad = softmax_cross_entropy(net.forward(x), labels)
            net.backward(grad)
            optimizer.step([g for _, g in net.gradients()])
            total_loss += loss * labels.size
        val_acc = _accuracy(net, ds, val_idx, config.batch_size)
        history.append(
            {
                "epoch": epoch,
                "loss": total_loss / max(1, order.size),
                "val_accuracy": val_acc,
            }
        )
        logger.info(
            "Glyph epoch %d: loss %.4f, val accuracy %.4f",
            epoch,
            history[-1]["loss"],
            val_acc,
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = {name: p.copy() for name, p in net.parameters()}
        if val_acc > config.target_acc:
            converged = True
            break

    net.load_parameters(best_params)
    checkpoint = GlyphClassifierCheckpoint(
        network=net,
        charset=ds.charset,
        val_accuracy=best_acc,
        config=config,
        history=history,
        converged=converged,
    )
    if not converged:
        raise DidNotConverge(
            f"val accuracy {best_acc:.4f} did not exceed {config.target_acc} "
            f"in {config.max_epochs} epochs",
            checkpoint,
        )
    return checkpoint


# ----------------------------------------------------------------------------
# Feature extraction
# ----------------------------------------------------------------------------


def canonical_probe(cp: int, font: FontFace) -> GlyphBitmap:
    """The unrotated, noise-free 80pt render used to embed a character."""
    return rasterize_centered(cp, font, PROBE_SIZE_PT, CLASSIFIER_CANVAS)


def extract_embeddings(
    ckpt: GlyphClassifierCheckpoint,
    bitmaps: Sequence[GlyphBitmap],
    layer_choice: LayerChoice = "conv",
) -> np.ndarray:
    """Embed a batch of bitmaps; rows follow the input order.

    conv gives the flattened final-conv block (1152 wide at full width);
    linear gives the logits (one per class).

    Raises:
        WrongCanvas: A bitmap does not match the network's input canvas.
    """
    _, height, width = ckpt.network.input_shape
    for bitmap in bitmaps:
        if (bitmap.width, bitmap.height) != (width, height):
            raise WrongCanvas(
                f"{format_cp(bitmap.codepoint)} is {bitmap.width}x{bitmap.height}, "
                f"classifier expects {width}x{height}"
            )
    if layer_choice not in ("conv", "linear"):
        raise ValueError(f"unknown layer choice {layer_choice!r}")
    x = np.stack([b.pixels for b in bitmaps])[:, None, :, :] if bitmaps else None
    if x is None:
        return np.zeros((0, 0), dtype=np.float32)
    upto = None
    if layer_choice == "conv":
        upto = layer_index(ckpt.network.specs, "flatten") + 1
    out = ckpt.network.forward(x, upto=upto)
    ckpt.network.clear()
    return np.asarray(out, dtype=np.float32)


def extract_embedding(
    ckpt: GlyphClassifierCheckpoint,
    bitmap: GlyphBitmap,
    layer_choice: LayerChoice = "conv",
) -> np.ndarray:
    """Embedding of one bitmap (see extract_embeddings).

    Example:
        >>> extract_embedding(ckpt, canonical_probe(ord("b"), dejavu)).shape
        (1152,)
    """
    return extract_embeddings(ckpt, [bitmap], layer_choice)[0]


def classify(
    ckpt: GlyphClassifierCheckpoint, bitmaps: Sequence[GlyphBitmap]
) -> list[int]:
    """Predicted codepoint per bitmap."""
    logits = extract_embeddings(ckpt, bitmaps, "linear")
    return [ckpt.charset[i] for i in predict_labels(logits)]


def probe_accuracy(ckpt: GlyphClassifierCheckpoint, font: FontFace) -> float:
    """Share of the charset whose canonical probe is classified correctly."""
    probes = [canonical_probe(cp, font) for cp in ckpt.charset]
    predicted = classify(ckpt, probes)
    hits = sum(int(p == cp) for p, cp in zip(predicted, ckpt.charset))
    return hits / len(ckpt.charset)
