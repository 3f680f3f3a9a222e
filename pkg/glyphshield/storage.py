"""
Binary container shared by checkpoints and embedding spaces.

Layout: a 4-byte little-endian unsigned header length, the UTF-8 JSON
header, then the concatenated little-endian float32 blobs. The header's
"blobs" entry lists each blob's name and shape in file order.

Plain meaning: Save named float arrays with a JSON description in one file.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any, Union

import numpy as np

from glyphshield.errors import CheckpointError

logger = logging.getLogger(__name__)

_LENGTH = struct.Struct("<I")
_FLOAT = np.dtype("<f4")


def write_container(
    path: Union[str, Path],
    header: dict[str, Any],
    blobs: list[tuple[str, np.ndarray]],
) -> Path:
    """Write a header and float32 blobs to a container file.

    Args:
        path: Destination file.
        header: JSON-serializable metadata. The "blobs" key is reserved.
        blobs: Ordered (name, array) pairs.

    Returns:
        The written path.

    Side effects:
        Creates parent directories and overwrites the file.
    """
    if "blobs" in header:
        raise CheckpointError("header key 'blobs' is reserved")
    full_header = dict(header)
    full_header["blobs"] = [
        {"name": name, "shape": list(array.shape)} for name, array in blobs
    ]
    encoded = json.dumps(full_header, sort_keys=True).encode("utf-8")

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as handle:
        handle.write(_LENGTH.pack(len(encoded)))
        handle.write(encoded)
        for _, array in blobs:
            handle.write(np.ascontiguousarray(array, dtype=_FLOAT).tobytes())
    logger.info("Wrote %s (%d blobs)", target, len(blobs))
    return target


def read_container(
    path: Union[str, Path],
) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """Read a container written by write_container.

    Returns:
        (header, blobs) where blobs maps name to a float32 array. Blob order
        is preserved in the mapping and in header["blobs"].

    Raises:
        CheckpointError: If the file is missing, truncated or inconsistent.
    """
    source = Path(path)
    try:
        raw = source.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"Cannot read {source}: {exc}") from exc

    if len(raw) < _LENGTH.size:
        raise CheckpointError(f"{source} is too short to be a container")
    (header_len,) = _LENGTH.unpack_from(raw, 0)
    start = _LENGTH.size
    try:
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{source} has a corrupt header: {exc}") from exc

    offset = start + header_len
    blobs: dict[str, np.ndarray] = {}
    for entry in header.get("blobs", []):
        shape = tuple(int(d) for d in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * _FLOAT.itemsize
        if offset + nbytes > len(raw):
            raise CheckpointError(f"{source} is truncated at blob {entry['name']}")
        array = np.frombuffer(raw, dtype=_FLOAT, count=count, offset=offset)
        blobs[entry["name"]] = array.reshape(shape).astype(np.float32)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(f"{source} has {len(raw) - offset} trailing bytes")
    return header, blobs
