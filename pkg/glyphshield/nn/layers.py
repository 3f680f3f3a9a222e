"""
Layer specifications and their numpy implementations.

Arrays carry a leading batch dimension: images are N x C x H x W, sequences
N x C x L, feature vectors N x F. Convolutions use stride 1; pooling uses a
stride equal to its kernel.

Plain meaning: The building blocks networks are stacked from.
"""

from __future__ import annotations

from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from glyphshield.errors import OddDimension, ShapeMismatch

Shape = tuple[int, ...]


class _Spec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Conv2DSpec(_Spec):
    type: Literal["conv2d"] = "conv2d"
    out_channels: int = Field(..., gt=0)
    kernel_h: int = Field(..., gt=0)
    kernel_w: int = Field(..., gt=0)
    padding: int = Field(default=0, ge=0)


class MaxPool2DSpec(_Spec):
    type: Literal["maxpool2d"] = "maxpool2d"
    kernel_h: int = Field(default=2, gt=0)
    kernel_w: int = Field(default=2, gt=0)


class ReLUSpec(_Spec):
    type: Literal["relu"] = "relu"


class LinearSpec(_Spec):
    type: Literal["linear"] = "linear"
    in_features: int = Field(..., gt=0)
    out_features: int = Field(..., gt=0)


class Conv1DSpec(_Spec):
    type: Literal["conv1d"] = "conv1d"
    out_channels: int = Field(..., gt=0)
    kernel_w: int = Field(..., gt=0)
    padding: int = Field(default=0, ge=0)


class MaxPool1DSpec(_Spec):
    type: Literal["maxpool1d"] = "maxpool1d"
    kernel_w: int = Field(..., gt=0)


class GlobalMaxPool1DSpec(_Spec):
    type: Literal["globalmaxpool1d"] = "globalmaxpool1d"


class FlattenSpec(_Spec):
    type: Literal["flatten"] = "flatten"


LayerSpec = Annotated[
    Union[
        Conv2DSpec,
        MaxPool2DSpec,
        ReLUSpec,
        LinearSpec,
        Conv1DSpec,
        MaxPool1DSpec,
        GlobalMaxPool1DSpec,
        FlattenSpec,
    ],
    Field(discriminator="type"),
]


def glorot_uniform(
    rng: np.random.Generator, shape: Shape, fan_in: int, fan_out: int, dtype
) -> np.ndarray:
    """Uniform init in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# ----------------------------------------------------------------------------
# Convolution core
# ----------------------------------------------------------------------------


def conv2d_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, padding: int = 0
) -> np.ndarray:
    """Cross-correlate a batch N x C x H x W with O x C x kh x kw kernels.

    Output is N x O x (H + 2p - kh + 1) x (W + 2p - kw + 1), stride 1.

    Raises:
        ShapeMismatch: Channel counts differ or the kernel exceeds the
            padded input.
    """
    return _conv_forward(x, weights, bias, (padding, padding))


def _conv_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, pad: tuple[int, int]
) -> np.ndarray:
    n, c, h, w = x.shape
    o, wc, kh, kw = weights.shape
    if c != wc:
        raise ShapeMismatch(f"input has {c} channels, kernels expect {wc}")
    out_h = h + 2 * pad[0] - kh + 1
    out_w = w + 2 * pad[1] - kw + 1
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch(f"kernel {kh}x{kw} exceeds padded input {h}x{w}")
    x_pad = _pad(x, pad)
    # Accumulate as O x N x H' x W', the natural tensordot layout.
    out = np.zeros((o, n, out_h, out_w), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = x_pad[:, :, i : i + out_h, j : j + out_w]
            out += np.tensordot(weights[:, :, i, j], patch, axes=([1], [1]))
    out += bias.reshape(o, 1, 1, 1)
    return out.transpose(1, 0, 2, 3)


def _conv_backward(
    x: np.ndarray, weights: np.ndarray, dy: np.ndarray, pad: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    _, _, h, w = x.shape
    _, _, kh, kw = weights.shape
    _, _, out_h, out_w = dy.shape
    x_pad = _pad(x, pad)
    dw = np.zeros_like(weights)
    dx_pad = np.zeros((x.shape[1], x.shape[0]) + x_pad.shape[2:], dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = x_pad[:, :, i : i + out_h, j : j + out_w]
            dw[:, :, i, j] = np.tensordot(dy, patch, axes=([0, 2, 3], [0, 2, 3]))
            dx_pad[:, :, i : i + out_h, j : j + out_w] += np.tensordot(
                weights[:, :, i, j], dy, axes=([0], [1])
            )
    db = dy.sum(axis=(0, 2, 3))
    dx = dx_pad[:, :, pad[0] : pad[0] + h, pad[1] : pad[1] + w].transpose(1, 0, 2, 3)
    return np.ascontiguousarray(dx), dw, db


def _pad(x: np.ndarray, pad: tuple[int, int]) -> np.ndarray:
    if pad == (0, 0):
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad[0], pad[0]), (pad[1], pad[1])))


def maxpool2d_forward(x: np.ndarray, kernel: tuple[int, int] = (2, 2)) -> np.ndarray:
    """Max over non-overlapping kh x kw windows of N x C x H x W.

    Raises:
        OddDimension: H or W is not a multiple of the kernel.
    """
    out, _ = _maxpool2d(x, kernel)
    return out


def _maxpool2d(x: np.ndarray, kernel: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    n, c, h, w = x.shape
    kh, kw = kernel
    if h % kh or w % kw:
        raise OddDimension(f"cannot pool {h}x{w} with a {kh}x{kw} window")
    windows = (
        x.reshape(n, c, h // kh, kh, w // kw, kw)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // kh, w // kw, kh * kw)
    )
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return out, argmax


# ----------------------------------------------------------------------------
# Layers
# ----------------------------------------------------------------------------


class Layer:
    """A layer instance: parameters, cached forward state and gradients."""

    def __init__(self, spec: _Spec):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache: Optional[tuple] = None

    def build(
        self, in_shape: Shape, rng: np.random.Generator, dtype
    ) -> Shape:  # pragma: no cover - overridden
        raise NotImplementedError

    def forward(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def clear(self) -> None:
        self._cache = None


class Conv2D(Layer):
    spec: Conv2DSpec

    def build(self, in_shape: Shape, rng: np.random.Generator, dtype) -> Shape:
        if len(in_shape) != 3:
            raise ShapeMismatch(f"conv2d needs C x H x W input, got {in_shape}")
        c, h, w = in_shape
        s = self.spec
        out_h = h + 2 * s.padding - s.kernel_h + 1
        out_w = w + 2 * s.padding - s.kernel_w + 1
        if out_h < 1 or out_w < 1:
            raise ShapeMismatch(f"conv2d kernel does not fit input {in_shape}")
        area = s.kernel_h * s.kernel_w
        self.params = {
            "weight": glorot_uniform(
                rng,
                (s.out_channels, c, s.kernel_h, s.kernel_w),
                c * area,
                s.out_channels * area,
                dtype,
            ),
            "bias": np.zeros(s.out_channels, dtype=dtype),
        }
        return (s.out_channels, out_h, out_w)

    def forward(self, x: np.ndarray) -> np.ndarray:
        pad = (self.spec.padding, self.spec.padding)
        self._cache = (x,)
        return _conv_forward(x, self.params["weight"], self.params["bias"], pad)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (x,) = self._cache
        pad = (self.spec.padding, self.spec.padding)
        dx, dw, db = _conv_backward(x, self.params["weight"], dy, pad)
        self.grads = {"weight": dw, "bias": db}
        return dx


class Conv1D(Layer):
    """1D convolution over N x C x L, run as a 2D convolution of height 1."""

    spec: Conv1DSpec

    def build(self, in_shape: Shape, rng: np.random.Generator, dtype) -> Shape:
        if len(in_shape) != 2:
            raise ShapeMismatch(f"conv1d needs C x L input, got {in_shape}")
        c, length = in_shape
        s = self.spec
        out_len = length + 2 * s.padding - s.kernel_w + 1
        if out_len < 1:
            raise ShapeMismatch(f"conv1d kernel {s.kernel_w} exceeds length {length}")
        self.params = {
            "weight": glorot_uniform(
                rng,
                (s.out_channels, c, 1, s.kernel_w),
                c * s.kernel_w,
                s.out_channels * s.kernel_w,
                dtype,
            ),
            "bias": np.zeros(s.out_channels, dtype=dtype),
        }
        return (s.out_channels, out_len)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x4 = x[:, :, None, :]
        self._cache = (x4,)
        out = _conv_forward(
            x4, self.params["weight"], self.params["bias"], (0, self.spec.padding)
        )
        return out[:, :, 0, :]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (x4,) = self._cache
        dx, dw, db = _conv_backward(
            x4, self.params["weight"], dy[:, :, None, :], (0, self.spec.padding)
        )
        self.grads = {"weight": dw, "bias": db}
        return dx[:, :, 0, :]


class MaxPool2D(Layer):
    spec: MaxPool2DSpec

    def build(self, in_shape: Shape, rng: np.random.Generator, dtype) -> Shape:
        if len(in_shape) != 3:
            raise ShapeMismatch(f"maxpool2d needs C x H x W input, got {in_shape}")
        c, h, w = in_shape
        kh, kw = self.spec.kernel_h, self.spec.kernel_w
        if h % kh or w % kw:
            raise OddDimension(f"cannot pool {h}x{w} with a {kh}x{kw} window")
        return (c, h // kh, w // kw)

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, argmax = _maxpool2d(x, (self.spec.kernel_h, self.spec.kernel_w))
        self._cache = (x.shape, argmax)
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        shape, argmax = self._cache
        n, c, h, w = shape
        kh, kw = self.spec.kernel_h, self.spec.kernel_w
        windows = np.zeros(argmax.shape + (kh * kw,), dtype=dy.dtype)
        np.put_along_axis(windows, argmax[..., None], dy[..., None], axis=-1)
        return (
            windows.reshape(n, c, h // kh, w // kw, kh, kw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(shape)
        )


class MaxPool1D(Layer):
    """Non-overlapping max pool; a tail shorter than the kernel is dropped."""

    spec: MaxPool1DSpec

    def build(self, in_shape: Shape, rng: np.random.Generator, dtype) -> Shape:
        if len(in_shape) != 2:
            raise ShapeMismatch(f"maxpool1d needs C x L input, got {in_shape}")
        c, length = in_shape
        out_len = length // self.spec.kernel_w
        if out_len < 1:
            raise ShapeMismatch(f"maxpool1d kernel exceeds length {length}")
        return (c, out_len)

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, length = x.shape
        k = self.spec.kernel_w
        out_len = length // k
        windows = x[:, :, : out_len * k].reshape(n, c, out_len, k)
        argmax = windows.argmax(axis=-1)
        self._cache = (x.shape, argmax)
        return np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        shape, argmax = self._cache
        n, c, length = shape
        k = self.spec.kernel_w
        windows = np.zeros(argmax.shape + (k,), dtype=dy.dtype)
        np.put_along_axis(windows, argmax[..., None], dy[..., None], axis=-1)
        dx = np.zeros(shape, dtype=dy.dtype)
        dx[:, :, : argmax.shape[-1] * k] = windows.reshape(n, c, -1)
        return dx


class GlobalMaxPool1D(Layer):
    spec: GlobalMaxPool1DSpec

    def build(self, in_shape: Shape, rng: np.random.Generator, dtype) -> Shape:
        if len(in_shape) != 2:
            raise ShapeMismatch(f"globalmaxpool1d needs C x L input, got {in_shape}")
        return (in_shape[0],)

    def forward(self, x: np.ndarray) -> np.ndarray:
        argmax = x.argmax(axis=-1)
        self._cache = (x.shape, argmax)
        return np.take_along_axis(x, argmax[..., None], axis=-1)[..., 0]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        shape, argmax = self._cache
        dx = np.zeros(shape, dtype=dy.dtype)
        np.put_along_axis(dx, argmax[..., None], dy[..., None], axis=-1)
        return dx


class ReLU(Layer):
    spec: ReLUSpec

    def build(self, in_shape: Shape, rng: np.random.Generator, dtype) -> Shape:
        return in_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        mask = x > 0
        self._cache = (mask,)
        return np.where(mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (mask,) = self._cache
        return np.where(mask, dy, 0).astype(dy.dtype, copy=False)


class Linear(Layer):
    """y = x W + b with W of shape in_features x out_features."""

    spec: LinearSpec

    def build(self, in_shape: Shape, rng: np.random.Generator, dtype) -> Shape:
        s = self.spec
        if in_shape != (s.in_features,):
            raise ShapeMismatch(
                f"linear expects ({s.in_features},) input, got {in_shape}"
            )
        self.params = {
            "weight": glorot_uniform(
                rng,
                (s.in_features, s.out_features),
                s.in_features,
                s.out_features,
                dtype,
            ),
            "bias": np.zeros(s.out_features, dtype=dtype),
        }
        return (s.out_features,)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = (x,)
        return x @ self.params["weight"] + self.params["bias"]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (x,) = self._cache
        self.grads = {"weight": x.T @ dy, "bias": dy.sum(axis=0)}
        return dy @ self.params["weight"].T


class Flatten(Layer):
    spec: FlattenSpec

    def build(self, in_shape: Shape, rng: np.random.Generator, dtype) -> Shape:
        return (int(np.prod(in_shape)),)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = (x.shape,)
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        (shape,) = self._cache
        return dy.reshape(shape)


LAYER_TYPES: dict[str, type[Layer]] = {
    "conv2d": Conv2D,
    "maxpool2d": MaxPool2D,
    "relu": ReLU,
    "linear": Linear,
    "conv1d": Conv1D,
    "maxpool1d": MaxPool1D,
    "globalmaxpool1d": GlobalMaxPool1D,
    "flatten": Flatten,
}


def make_layer(spec: _Spec) -> Layer:
    return LAYER_TYPES[spec.type](spec)  # type: ignore[attr-defined]
