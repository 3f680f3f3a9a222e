"""
Network checkpoints.

A checkpoint holds one or more named networks plus free-form metadata in the
shared container format: the JSON header records each network's layer
specs, input shape and init seed, and the parameter blobs follow in layer
order.

Plain meaning: Save trained networks to disk and load them back.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np

from glyphshield.errors import CheckpointError, ShapeMismatch
from glyphshield.nn.network import Network
from glyphshield.storage import read_container, write_container

CHECKPOINT_FORMAT = "glyphshield.checkpoint/1"


def save_checkpoint(
    path: Union[str, Path],
    networks: Mapping[str, Network],
    metadata: Optional[dict[str, Any]] = None,
) -> Path:
    """Write named networks and metadata to one file.

    Side effects:
        Creates parent directories and overwrites the file.
    """
    header = {
        "format": CHECKPOINT_FORMAT,
        "networks": {
            name: {
                "layers": [spec.model_dump() for spec in net.specs],
                "input_shape": list(net.input_shape),
                "seed": net.seed,
            }
            for name, net in networks.items()
        },
        "metadata": metadata or {},
    }
    blobs = [
        (f"{name}/{param_name}", array)
        for name, net in networks.items()
        for param_name, array in net.parameters()
    ]
    return write_container(path, header, blobs)


def load_checkpoint(
    path: Union[str, Path],
) -> tuple[dict[str, Network], dict[str, Any]]:
    """Read a checkpoint written by save_checkpoint.

    Returns:
        (networks by name, metadata). Networks are float32.

    Raises:
        CheckpointError: Missing file, wrong format or inconsistent blobs.
    """
    header, blobs = read_container(path)
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a glyphshield checkpoint")

    networks: dict[str, Network] = {}
    for name, entry in header["networks"].items():
        net = Network(entry["layers"], tuple(entry["input_shape"]), seed=entry["seed"])
        prefix = f"{name}/"
        values = {
            key[len(prefix) :]: value
            for key, value in blobs.items()
            if key.startswith(prefix)
        }
        try:
            net.load_parameters(values)
        except ShapeMismatch as exc:
            raise CheckpointError(f"{path}: network {name}: {exc}") from exc
        networks[name] = net
    return networks, header.get("metadata", {})


def parameters_equal(a: Network, b: Network) -> bool:
    """True when two networks hold bit-identical parameters."""
    pa, pb = a.parameters(), b.parameters()
    return len(pa) == len(pb) and all(
        na == nb and x.shape == y.shape and np.array_equal(x, y)
        for (na, x), (nb, y) in zip(pa, pb)
    )
