"""Tests for the binary container format."""

import numpy as np
import pytest

from glyphshield.errors import CheckpointError
from glyphshield.storage import read_container, write_container


def test_container_preserves_arrays(tmp_path):
    a = np.arange(6, dtype=np.float32).reshape(2, 3)
    b = np.array([1.5, -2.25], dtype=np.float32)
    path = write_container(tmp_path / "x.bin", {"format": "test"}, [("a", a), ("b", b)])
    header, blobs = read_container(path)
    assert header["format"] == "test"
    assert [entry["name"] for entry in header["blobs"]] == ["a", "b"]
    np.testing.assert_array_equal(blobs["a"], a)
    np.testing.assert_array_equal(blobs["b"], b)


def test_header_layout(tmp_path):
    path = write_container(tmp_path / "x.bin", {"k": 1}, [("v", np.ones(3))])
    raw = path.read_bytes()
    length = int.from_bytes(raw[:4], "little")
    assert raw[4 + length :] == np.ones(3, dtype="<f4").tobytes()


def test_reserved_key(tmp_path):
    with pytest.raises(CheckpointError):
        write_container(tmp_path / "x.bin", {"blobs": []}, [])


def test_truncated_file(tmp_path):
    path = write_container(tmp_path / "x.bin", {}, [("v", np.ones(4))])
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(CheckpointError, match="truncated"):
        read_container(path)


def test_trailing_bytes(tmp_path):
    path = write_container(tmp_path / "x.bin", {}, [("v", np.ones(2))])
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        read_container(path)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        read_container(tmp_path / "absent.bin")
