"""Sequential networks with exact reverse-mode gradients.

Plain meaning: A stack of layers that can learn from its mistakes.
"""

from __future__ import annotations

import logging
from typing import Any, Iterable, Optional, Sequence

import numpy as np
from pydantic import TypeAdapter

from glyphshield.errors import NoForwardState, ShapeMismatch
from glyphshield.nn.layers import Layer, LayerSpec, Shape, make_layer

logger = logging.getLogger(__name__)

_SPEC_LIST = TypeAdapter(list[LayerSpec])


def parse_layer_specs(data: Iterable[Any]) -> list:
    """Validate a list of layer dicts (or spec objects) into LayerSpecs."""
    return _SPEC_LIST.validate_python(
        [item.model_dump() if hasattr(item, "model_dump") else item for item in data]
    )


class Network:
    """An ordered list of layers built for a fixed per-sample input shape.

    Args:
        specs: Layer specifications, in order.
        input_shape: Per-sample input shape (no batch dimension).
        seed: Parameter init seed.
        dtype: Parameter and activation dtype (float32 unless checking
            gradients).

    Raises:
        ShapeMismatch: If adjacent layers do not compose.
        OddDimension: If a 2D pool meets an odd-sized input.

    Example:
        >>> net = Network([LinearSpec(in_features=4, out_features=2)], (4,))
        >>> net.forward(np.ones((3, 4), dtype=np.float32)).shape
        (3, 2)

    Plain meaning: A neural network assembled from a recipe.
    """

    def __init__(
        self,
        specs: Sequence,
        input_shape: Shape,
        seed: int = 0,
        dtype: Any = np.float32,
    ):
        self.specs = parse_layer_specs(specs)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.seed = seed
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)

        self.layers: list[Layer] = []
        self.shapes: list[Shape] = [self.input_shape]
        shape = self.input_shape
        for index, spec in enumerate(self.specs):
            layer = make_layer(spec)
            try:
                shape = layer.build(shape, rng, self.dtype)
            except ShapeMismatch as exc:
                raise ShapeMismatch(f"layer {index} ({spec.type}): {exc}") from exc
            self.layers.append(layer)
            self.shapes.append(shape)
        self._forward_input: Optional[np.ndarray] = None

    @property
    def output_shape(self) -> Shape:
        return self.shapes[-1]

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """(name, array) pairs in layer order; names are "<layer>.<param>"."""
        return [
            (f"{index}.{name}", array)
            for index, layer in enumerate(self.layers)
            for name, array in layer.params.items()
        ]

    def gradients(self) -> list[tuple[str, np.ndarray]]:
        """Gradients parallel to parameters(), from the last backward pass."""
        return [
            (f"{index}.{name}", layer.grads[name])
            for index, layer in enumerate(self.layers)
            for name in layer.params
        ]

    @property
    def num_parameters(self) -> int:
        return sum(array.size for _, array in self.parameters())

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        """Replace parameters by name, checking shapes.

        Raises:
            ShapeMismatch: A value is missing or has the wrong shape.
        """
        for index, layer in enumerate(self.layers):
            for name, current in layer.params.items():
                key = f"{index}.{name}"
                if key not in values:
                    raise ShapeMismatch(f"no value for parameter {key}")
                value = np.asarray(values[key])
                if value.shape != current.shape:
                    raise ShapeMismatch(
                        f"parameter {key}: expected {current.shape}, got {value.shape}"
                    )
                layer.params[name] = value.astype(self.dtype, copy=True)

    def forward(self, x: np.ndarray, upto: Optional[int] = None) -> np.ndarray:
        """Run the first `upto` layers (all by default) on a batch.

        Only a full forward pass can be followed by backward.

        Raises:
            ShapeMismatch: The batch does not match input_shape.
        """
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeMismatch(
                f"expected N x {self.input_shape} input, got {tuple(x.shape)}"
            )
        stop = len(self.layers) if upto is None else upto
        out = x.astype(self.dtype, copy=False)
        for layer in self.layers[:stop]:
            out = layer.forward(out)
        self._forward_input = x if stop == len(self.layers) else None
        return out

    def backward(self, loss_grad: np.ndarray) -> np.ndarray:
        """Backpropagate d(loss)/d(output); returns d(loss)/d(input).

        Parameter gradients are left on the layers (see gradients()). The
        recorded forward state is consumed.

        Raises:
            NoForwardState: No full forward pass precedes this call.
        """
        if self._forward_input is None:
            raise NoForwardState("backward needs a preceding full forward pass")
        grad = loss_grad.astype(self.dtype, copy=False)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        self.clear()
        return grad

    def clear(self) -> None:
        self._forward_input = None
        for layer in self.layers:
            layer.clear()

    def predict(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Forward in batches without keeping state for backward."""
        outputs = [
            self.forward(x[start : start + batch_size])
            for start in range(0, len(x), batch_size)
        ]
        self.clear()
        if not outputs:
            return np.zeros((0,) + self.output_shape, dtype=self.dtype)
        return np.concatenate(outputs)

    def describe(self) -> list[dict[str, Any]]:
        """Layer-by-layer summary with output shapes."""
        return [
            {"index": i, "type": spec.type, "output_shape": list(self.shapes[i + 1])}
            for i, spec in enumerate(self.specs)
        ]


def backward(
    net: Network, x: np.ndarray, loss_grad: np.ndarray
) -> dict[str, np.ndarray]:
    """Gradients of every parameter for the forward pass just run on x.

    Raises:
        NoForwardState: The network's last full forward pass was not on x.
    """
    if net._forward_input is None or net._forward_input is not x:
        raise NoForwardState("no recorded forward pass for this input")
    net.backward(loss_grad)
    return dict(net.gradients())


def layer_index(specs: Sequence, type_name: str, last: bool = True) -> int:
    """Index of the last (or first) layer of a type, for forward(upto=...)."""
    matches = [i for i, spec in enumerate(specs) if spec.type == type_name]
    if not matches:
        raise ValueError(f"no {type_name} layer in network")
    return matches[-1] if last else matches[0]
