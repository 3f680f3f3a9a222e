"""Training and evaluation of text classifiers."""

from __future__ import annotations

import logging
from typing import Any, Callable, Optional

import numpy as np
from pydantic import BaseModel, Field

from glyphshield.errors import ClassCountMismatch, EmptyDataset, InvalidDataset
from glyphshield.nn.losses import predict_labels, softmax_cross_entropy
from glyphshield.nn.optim import SGD
from glyphshield.raster import PRIMARY_FONT_FILE
from glyphshield.text.data import Dataset, train_val_split
from glyphshield.text.encoders import RenderConfig, ices_render_config
from glyphshield.text.models import (
    TextClassifier,
    TextModelCheckpoint,
    build_text_model,
)
from glyphshield.text.vocab import DEFAULT_MAX_LEN, build_vocabulary

logger = logging.getLogger(__name__)

# Called with (epoch, training split); returns the texts to train on that epoch.
EpochTexts = Callable[[int, Dataset], list[str]]


class TextTrainConfig(BaseModel):
    """Text-classifier training settings.

    Plain meaning: How long and how fast to train a text reader.
    """

    lr: float = Field(default=0.01, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    batch_size: int = Field(default=32, gt=0)
    epochs: int = Field(default=10, ge=0)
    seed: int = 0
    max_len: int = Field(default=DEFAULT_MAX_LEN, ge=45)
    val_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    font_file: str = PRIMARY_FONT_FILE


class EvalResult(BaseModel):
    """Accuracy of a model on one dataset.

    Plain meaning: How many texts the model got right.
    """

    accuracy: float
    n_samples: int
    correct: int
    per_class: dict[int, dict[str, int]]


def _check_dataset(train: Dataset) -> None:
    if len(train) == 0:
        raise InvalidDataset("training set is empty")
    if len(set(train.labels.tolist())) < 2:
        raise InvalidDataset("training set needs at least two classes")


def new_text_model(
    kind: str, train: Dataset, config: TextTrainConfig
) -> TextClassifier:
    """Untrained model of a kind, sized for a training set."""
    if kind == "charcnn":
        vocab = build_vocabulary(train.texts, max_len=config.max_len, case_fold=True)
        if vocab.size == 0:
            raise InvalidDataset("no vocabulary symbol occurs in the training texts")
        return build_text_model(kind, train.num_classes, vocab=vocab, seed=config.seed)
    render = (
        RenderConfig(font_file=config.font_file)
        if kind == "vb"
        else ices_render_config(config.font_file)
    )
    return build_text_model(
        kind, train.num_classes, max_len=config.max_len, render=render, seed=config.seed
    )


def _accuracy(
    model: TextClassifier, dataset: Dataset, batch_size: int
) -> Optional[float]:
    if len(dataset) == 0:
        return None
    predicted = model.predict(dataset.texts, batch_size)
    return float((predicted == dataset.labels).mean())


def train_text_classifier(
    train: Dataset,
    kind: str = "charcnn",
    config: Optional[TextTrainConfig] = None,
    model: Optional[TextClassifier] = None,
    epoch_texts: Optional[EpochTexts] = None,
    epoch_offset: int = 0,
) -> TextModelCheckpoint:
    """Train a text classifier with SGD on softmax cross-entropy.

    Args:
        train: Labeled training texts (a val split is carved out of it).
        kind: "charcnn", "vb" or "ices" (ignored when model is given).
        config: Training settings.
        model: Continue training this model instead of a fresh one.
        epoch_texts: Optional per-epoch replacement of the training texts
            (adversarial training perturbs them here).
        epoch_offset: Added to the epoch number in history and seeds.

    Returns:
        TextModelCheckpoint with per-epoch history and final metrics.

    Raises:
        InvalidDataset: Empty set, fewer than two classes, or no known
            characters for a one-hot vocabulary.

    Plain meaning: Show the reader labeled texts until it learns the topics.
    """
    config = config or TextTrainConfig()
    _check_dataset(train)
    fit_set, val_set = train_val_split(train, config.val_fraction, config.seed)
    if len(fit_set) == 0:
        raise InvalidDataset("validation split leaves no training samples")
    model = model or new_text_model(kind, fit_set, config)
    optimizer = SGD(model.parameters(), config.lr, config.momentum)
    labels = fit_set.labels

    history: list[dict[str, Any]] = []
    for step in range(1, config.epochs + 1):
        epoch = epoch_offset + step
        texts = epoch_texts(epoch, fit_set) if epoch_texts else fit_set.texts
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, epoch]))
        order = rng.permutation(len(fit_set))
        total_loss = 0.0
        correct = 0
        for start in range(0, order.size, config.batch_size):
            batch = order[start : start + config.batch_size]
            logits = model.forward([texts[i] for i in batch])
            loss, grad = softmax_cross_entropy(logits, labels[batch])
            correct += int((predict_labels(logits) == labels[batch]).sum())
            model.backward(grad)
            optimizer.step(model.gradients())
            total_loss += loss * batch.size
        record = {
            "epoch": epoch,
            "loss": total_loss / order.size,
            "train_accuracy": correct / order.size,
            "val_accuracy": _accuracy(model, val_set, config.batch_size),
        }
        history.append(record)
        logger.info(
            "Text %s epoch %d: loss %.4f, train accuracy %.4f",
            model.kind,
            epoch,
            record["loss"],
            record["train_accuracy"],
        )

    return TextModelCheckpoint(
        model=model,
        history=history,
        train_accuracy=_accuracy(model, fit_set, config.batch_size),
        val_accuracy=_accuracy(model, val_set, config.batch_size),
        config=config.model_dump(),
    )


def evaluate(
    ckpt: TextModelCheckpoint, test: Dataset, batch_size: int = 128
) -> EvalResult:
    """Argmax accuracy of a model on a dataset.

    Raises:
        ClassCountMismatch: Dataset and model disagree on the class count.
        EmptyDataset: The dataset has no samples.

    Example:
        >>> evaluate(ckpt, test).accuracy
        0.87
    """
    if test.num_classes != ckpt.num_classes:
        raise ClassCountMismatch(
            f"model has {ckpt.num_classes} classes, dataset has {test.num_classes}"
        )
    if len(test) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    predicted = ckpt.model.predict(test.texts, batch_size)
    truth = test.labels
    hits = predicted == truth
    per_class = {
        label: {
            "correct": int(hits[truth == label].sum()),
            "total": int((truth == label).sum()),
        }
        for label in range(test.num_classes)
    }
    correct = int(hits.sum())
    return EvalResult(
        accuracy=correct / len(test),
        n_samples=len(test),
        correct=correct,
        per_class=per_class,
    )
