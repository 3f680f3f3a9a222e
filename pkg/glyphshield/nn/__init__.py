"""
Minimal numpy neural-network engine.

Plain meaning: Just enough deep learning to train glyph and text classifiers.
"""

from glyphshield.nn.checkpoint import load_checkpoint, save_checkpoint
from glyphshield.nn.gradcheck import gradient_check, input_gradient_check
from glyphshield.nn.layers import (
    Conv1DSpec,
    Conv2DSpec,
    FlattenSpec,
    GlobalMaxPool1DSpec,
    LayerSpec,
    LinearSpec,
    MaxPool1DSpec,
    MaxPool2DSpec,
    ReLUSpec,
    conv2d_forward,
    maxpool2d_forward,
)
from glyphshield.nn.losses import predict_labels, softmax_cross_entropy
from glyphshield.nn.network import Network, backward
from glyphshield.nn.optim import SGD, sgd_step

__all__ = [
    "Conv1DSpec",
    "Conv2DSpec",
    "FlattenSpec",
    "GlobalMaxPool1DSpec",
    "LayerSpec",
    "LinearSpec",
    "MaxPool1DSpec",
    "MaxPool2DSpec",
    "Network",
    "ReLUSpec",
    "SGD",
    "backward",
    "conv2d_forward",
    "gradient_check",
    "input_gradient_check",
    "load_checkpoint",
    "maxpool2d_forward",
    "predict_labels",
    "save_checkpoint",
    "sgd_step",
    "softmax_cross_entropy",
]
