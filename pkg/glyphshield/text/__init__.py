"""
Character-level text classification.

Plain meaning: Models that sort texts into categories, one character at a time.
"""

from glyphshield.text.data import Dataset, TextSample, load_csv, stratified_subsample
from glyphshield.text.encoders import (
    RenderConfig,
    VisualEncoder,
    encode_onehot,
    encode_visual,
)
from glyphshield.text.models import (
    TextClassifier,
    TextModelCheckpoint,
    build_text_model,
    encoder_similarity,
)
from glyphshield.text.training import (
    EvalResult,
    TextTrainConfig,
    evaluate,
    train_text_classifier,
)
from glyphshield.text.vocab import UNKNOWN, Vocabulary, build_vocabulary

__all__ = [
    "Dataset",
    "EvalResult",
    "RenderConfig",
    "TextClassifier",
    "TextModelCheckpoint",
    "TextSample",
    "TextTrainConfig",
    "UNKNOWN",
    "VisualEncoder",
    "Vocabulary",
    "build_text_model",
    "build_vocabulary",
    "encode_onehot",
    "encode_visual",
    "encoder_similarity",
    "evaluate",
    "load_csv",
    "stratified_subsample",
    "train_text_classifier",
]
