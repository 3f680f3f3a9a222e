"""
Character-level text classifiers.

All three kinds share the Char-CNN body and differ in how characters become
input rows:

- ``charcnn``: one-hot rows over the training vocabulary.
- ``vb``: glyph-encoder rows; the 2D CNN trains with the classifier.
- ``ices``: fixed 24 x 24 pixel rows; only the Char-CNN trains.

Plain meaning: Networks that read a text letter by letter and name its topic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Optional, Sequence, Union

import numpy as np

from glyphshield.errors import CheckpointError
from glyphshield.nn.checkpoint import load_checkpoint, save_checkpoint
from glyphshield.nn.layers import (
    Conv1DSpec,
    GlobalMaxPool1DSpec,
    LinearSpec,
    MaxPool1DSpec,
    ReLUSpec,
)
from glyphshield.nn.losses import predict_labels
from glyphshield.nn.network import Network
from glyphshield.spaces.search import cosine
from glyphshield.text.encoders import (
    IcesEncoder,
    ImageTable,
    RenderConfig,
    VisualEncoder,
    glyph_encoder_network,
    ices_render_config,
    onehot_batch,
)
from glyphshield.text.vocab import DEFAULT_MAX_LEN, Vocabulary

logger = logging.getLogger(__name__)

TextModelKind = Literal["charcnn", "vb", "ices"]
TEXT_MODEL_KINDS: tuple[str, ...] = ("charcnn", "vb", "ices")

CHAR_CNN_FILTERS = 64
CHAR_CNN_HIDDEN = 128


def char_cnn_specs(num_classes: int) -> list:
    """Conv1D(64,7) pool3, Conv1D(64,5) pool3, Conv1D(64,3), global max, 128, K."""
    f = CHAR_CNN_FILTERS
    return [
        Conv1DSpec(out_channels=f, kernel_w=7),
        ReLUSpec(),
        MaxPool1DSpec(kernel_w=3),
        Conv1DSpec(out_channels=f, kernel_w=5),
        ReLUSpec(),
        MaxPool1DSpec(kernel_w=3),
        Conv1DSpec(out_channels=f, kernel_w=3),
        ReLUSpec(),
        GlobalMaxPool1DSpec(),
        LinearSpec(in_features=f, out_features=CHAR_CNN_HIDDEN),
        ReLUSpec(),
        LinearSpec(in_features=CHAR_CNN_HIDDEN, out_features=num_classes),
    ]


class TextClassifier:
    """A Char-CNN body over one of the three character encoders.

    Args:
        kind: "charcnn", "vb" or "ices".
        network: The Char-CNN body (input: channels x max_len).
        max_len: Characters per text.
        vocab: One-hot vocabulary (charcnn only).
        visual: Glyph encoder (vb only).
        ices: Pixel encoder (ices only).

    Plain meaning: One trained text reader, whatever its alphabet.
    """

    def __init__(
        self,
        kind: str,
        network: Network,
        max_len: int,
        vocab: Optional[Vocabulary] = None,
        visual: Optional[VisualEncoder] = None,
        ices: Optional[IcesEncoder] = None,
    ):
        if kind not in TEXT_MODEL_KINDS:
            raise ValueError(f"unknown text model kind {kind!r}")
        required = {"charcnn": vocab, "vb": visual, "ices": ices}[kind]
        if required is None:
            raise ValueError(f"{kind} model is missing its character encoder")
        self.kind = kind
        self.network = network
        self.max_len = max_len
        self.vocab = vocab
        self.visual = visual
        self.ices = ices

    @property
    def num_classes(self) -> int:
        return self.network.output_shape[0]

    def inputs(self, texts: Sequence[str]) -> np.ndarray:
        """Encode texts to the N x channels x max_len network input."""
        if self.kind == "charcnn":
            assert self.vocab is not None
            return onehot_batch(texts, self.vocab)
        if self.kind == "vb":
            assert self.visual is not None
            return self.visual.encode_batch(texts, self.max_len)
        assert self.ices is not None
        return self.ices.encode_batch(texts, self.max_len)

    def forward(self, texts: Sequence[str]) -> np.ndarray:
        return self.network.forward(self.inputs(texts))

    def backward(self, loss_grad: np.ndarray) -> None:
        """Backpropagate; for vb the glyph encoder receives gradients too."""
        d_input = self.network.backward(loss_grad)
        if self.kind == "vb":
            assert self.visual is not None
            self.visual.backward(d_input)

    def networks(self) -> dict[str, Network]:
        nets = {"text": self.network}
        if self.visual is not None:
            nets["glyph_encoder"] = self.visual.network
        return nets

    def parameters(self) -> list[np.ndarray]:
        return [p for net in self.networks().values() for _, p in net.parameters()]

    def gradients(self) -> list[np.ndarray]:
        return [g for net in self.networks().values() for _, g in net.gradients()]

    def predict(self, texts: Sequence[str], batch_size: int = 128) -> np.ndarray:
        """Argmax class per text."""
        predictions = [
            predict_labels(self.forward(texts[start : start + batch_size]))
            for start in range(0, len(texts), batch_size)
        ]
        self.network.clear()
        if self.visual is not None:
            self.visual.network.clear()
        if not predictions:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(predictions)


def build_text_model(
    kind: str,
    num_classes: int,
    vocab: Optional[Vocabulary] = None,
    max_len: int = DEFAULT_MAX_LEN,
    render: Optional[RenderConfig] = None,
    images: Optional[ImageTable] = None,
    seed: int = 0,
    dtype: Any = np.float32,
) -> TextClassifier:
    """Build an untrained text classifier of the given kind.

    Args:
        kind: "charcnn", "vb" or "ices".
        num_classes: Output width.
        vocab: Vocabulary (charcnn).
        max_len: Characters per text (taken from vocab for charcnn).
        render: Render config (vb default 32 x 32 at 24pt; ices 24 x 24 at 20pt).
        images: Pre-built image table, sharing a render cache.
        seed: Init seed; the glyph encoder uses seed + 1.
        dtype: Engine dtype.
    """
    if kind == "charcnn":
        if vocab is None:
            raise ValueError("charcnn needs a vocabulary")
        net = Network(
            char_cnn_specs(num_classes),
            (vocab.size, vocab.max_len),
            seed=seed,
            dtype=dtype,
        )
        return TextClassifier(kind, net, vocab.max_len, vocab=vocab)
    if kind == "vb":
        table = images or ImageTable(render or RenderConfig())
        encoder_net = glyph_encoder_network(
            table.config.canvas, seed=seed + 1, dtype=dtype
        )
        visual = VisualEncoder(table, encoder_net)
        net = Network(
            char_cnn_specs(num_classes), (visual.dim, max_len), seed=seed, dtype=dtype
        )
        return TextClassifier(kind, net, max_len, visual=visual)
    if kind == "ices":
        table = images or ImageTable(render or ices_render_config())
        ices = IcesEncoder(table)
        net = Network(
            char_cnn_specs(num_classes), (ices.dim, max_len), seed=seed, dtype=dtype
        )
        return TextClassifier(kind, net, max_len, ices=ices)
    raise ValueError(f"unknown text model kind {kind!r}")


@dataclass
class TextModelCheckpoint:
    """A trained text classifier with its training record.

    Plain meaning: A text reader ready to be saved, loaded and tested.
    """

    model: TextClassifier
    history: list[dict[str, Any]] = field(default_factory=list)
    train_accuracy: Optional[float] = None
    val_accuracy: Optional[float] = None
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.model.kind

    @property
    def num_classes(self) -> int:
        return self.model.num_classes

    def save(self, path: Union[str, Path]) -> Path:
        metadata: dict[str, Any] = {
            "kind": "text_classifier",
            "model_kind": self.kind,
            "num_classes": self.num_classes,
            "max_len": self.model.max_len,
            "history": self.history,
            "train_accuracy": self.train_accuracy,
            "val_accuracy": self.val_accuracy,
            "config": self.config,
        }
        if self.model.vocab is not None:
            metadata["vocabulary"] = self.model.vocab.to_dict()
        table = self.model.visual.images if self.model.visual else None
        table = table or (self.model.ices.images if self.model.ices else None)
        if table is not None:
            metadata["render"] = table.config.model_dump()
        return save_checkpoint(path, self.model.networks(), metadata)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TextModelCheckpoint":
        """Load a text-model checkpoint.

        Raises:
            CheckpointError: Wrong file kind or missing auxiliary data.
        """
        networks, metadata = load_checkpoint(path)
        if metadata.get("kind") != "text_classifier":
            raise CheckpointError(f"{path} is not a text-classifier checkpoint")
        kind = metadata["model_kind"]
        max_len = int(metadata["max_len"])
        text_net = networks["text"]
        if kind == "charcnn":
            vocab = Vocabulary.from_dict(metadata["vocabulary"])
            model = TextClassifier(kind, text_net, max_len, vocab=vocab)
        elif kind == "vb":
            if "glyph_encoder" not in networks:
                raise CheckpointError(f"{path} has no glyph encoder")
            table = ImageTable(RenderConfig.model_validate(metadata["render"]))
            visual = VisualEncoder(table, networks["glyph_encoder"])
            model = TextClassifier(kind, text_net, max_len, visual=visual)
        elif kind == "ices":
            table = ImageTable(RenderConfig.model_validate(metadata["render"]))
            model = TextClassifier(kind, text_net, max_len, ices=IcesEncoder(table))
        else:
            raise CheckpointError(f"{path} has unknown model kind {kind!r}")
        return cls(
            model=model,
            history=list(metadata.get("history", [])),
            train_accuracy=metadata.get("train_accuracy"),
            val_accuracy=metadata.get("val_accuracy"),
            config=dict(metadata.get("config", {})),
        )


def encoder_similarity(ckpt: TextModelCheckpoint, a: str, b: str) -> float:
    """Cosine between the glyph-encoder embeddings of two characters.

    Raises:
        ValueError: The model has no glyph encoder.
        ZeroVector: A character cannot be rendered.

    Example:
        >>> encoder_similarity(vb_ckpt, "z", "Z")  # doctest: +SKIP
        0.69
    """
    if ckpt.model.visual is None:
        raise ValueError("only vision-based models have a glyph encoder")
    vectors = ckpt.model.visual.embed([ord(a), ord(b)])
    return cosine(vectors[0], vectors[1])
