"""Tests for the glyphshield CLI."""

import argparse
import json
from unittest.mock import MagicMock, patch

import numpy as np
import pytest
import yaml

from glyphshield import cli
from glyphshield.attack import HSet, save_hset
from glyphshield.spaces.models import EmbeddingSpace

SUBCOMMANDS = (
    "render",
    "build-space",
    "neighbors",
    "attack",
    "train-glyph",
    "train-text",
    "adv-train",
    "curve",
    "compare-extraction",
    "run",
    "fetch-names",
)


def run_json(capsys, *argv):
    exit_code = cli.main(["--json", *argv])
    data = json.loads(capsys.readouterr().out.strip())
    return exit_code, data


@pytest.fixture
def space_file(tmp_path):
    matrix = np.array(
        [
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ],
        dtype=np.float32,
    )
    space = EmbeddingSpace(
        kind="i2ces", dim=3, codepoints=(0x61, 0x62, 0x63, 0x64, 0x65), matrix=matrix
    )
    return space.save(tmp_path / "toy.space")


@pytest.fixture
def toy_config(tmp_path, toy_dataset_dir):
    data = {
        "experiment_id": "toy",
        "output_dir": str(tmp_path / "runs"),
        "dataset": {"path": str(toy_dataset_dir), "train_n": None, "test_n": None},
        "models": [{"kind": "charcnn"}],
        "p_grid": [0.0, 1.0],
        "seeds": [0],
        "train": {
            "max_len": 45,
            "epochs": 1,
            "batch_size": 4,
            "lr": 0.05,
            "val_fraction": 0.0,
        },
    }
    path = tmp_path / "toy.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def test_no_command_prints_help(capsys):
    """A bare invocation shows usage and fails."""
    assert cli.main([]) == 1
    assert "usage: glyphshield" in capsys.readouterr().out


def test_help_lists_subcommands(capsys):
    """Every subcommand is reachable from the top-level help."""
    with pytest.raises(SystemExit) as info:
        cli.main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for name in SUBCOMMANDS:
        assert name in out


def test_subcommand_help_lists_every_option():
    """Each registered option string shows up in its subcommand help."""
    parser = cli._build_parser()
    subparsers = next(
        action
        for action in parser._actions
        if isinstance(action, argparse._SubParsersAction)
    )
    for name, sub in subparsers.choices.items():
        text = sub.format_help()
        assert f"glyphshield {name}" in text
        for action in sub._actions:
            for option in action.option_strings:
                assert option in text, (name, option)


def _normalize_help(text):
    text = text.replace("optional arguments:", "options:")
    return " ".join(text.split())


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_subcommand_help_matches_golden(name, fixtures_dir, monkeypatch, capsys):
    """Subcommand help matches the recorded text, ignoring line wrapping."""
    monkeypatch.setenv("COLUMNS", "100")
    monkeypatch.setenv("NO_COLOR", "1")
    monkeypatch.setenv("PYTHON_COLORS", "0")
    monkeypatch.delenv("FORCE_COLOR", raising=False)
    with pytest.raises(SystemExit) as info:
        cli.main([name, "--help"])
    assert info.value.code == 0
    golden = fixtures_dir / "cli_help" / f"{name}.txt"
    expected = golden.read_text(encoding="utf-8")
    assert _normalize_help(capsys.readouterr().out) == _normalize_help(expected)


def test_attack_zero_probability_copies_input(tmp_path, capsys):
    """p = 0 leaves the text byte-identical."""
    source = tmp_path / "in.txt"
    source.write_bytes("Bob ate a banana.\r\nsecond line\n".encode("utf-8"))
    target = tmp_path / "out.txt"

    exit_code, data = run_json(
        capsys, "attack", str(source), "--p", "0", "--out", str(target)
    )
    assert exit_code == 0
    assert data["command"] == "attack"
    assert data["details"]["replaced"] == 0
    assert target.read_bytes() == source.read_bytes()


def test_attack_with_custom_hset(tmp_path, capsys):
    """p = 1 replaces every listed character."""
    hset = HSet(
        replacements={ord("a"): (0x430,)},
        provenance={"space_kind": "manual", "curation": "file"},
    )
    hset_path = save_hset(hset, tmp_path / "a.json")
    source = tmp_path / "in.txt"
    source.write_text("banana", encoding="utf-8")
    target = tmp_path / "out.txt"

    exit_code, data = run_json(
        capsys,
        "attack",
        str(source),
        "--hset",
        str(hset_path),
        "--p",
        "1",
        "--seed",
        "3",
        "--out",
        str(target),
    )
    assert exit_code == 0
    assert data["details"]["seed"] == 3
    assert data["details"]["replaced"] == 3
    assert target.read_text(encoding="utf-8") == "b\u0430n\u0430n\u0430"


def test_build_ices_space(tmp_path, dejavu_path, capsys):
    """ICES over three letters has 576 dimensions and three entries."""
    charset = tmp_path / "abc.txt"
    charset.write_text("abc\n", encoding="utf-8")
    target = tmp_path / "abc.space"
    exit_code, data = run_json(
        capsys,
        "build-space",
        "ices",
        "--charset",
        str(charset),
        "--font",
        str(dejavu_path),
        "--out",
        str(target),
    )
    assert exit_code == 0
    assert (data["details"]["dim"], data["details"]["entries"]) == (576, 3)
    space = EmbeddingSpace.load(target)
    assert space.codepoints == (0x61, 0x62, 0x63)


def test_neighbors_from_space(space_file, capsys):
    """Asking for more neighbors than exist returns the whole space minus self."""
    exit_code, data = run_json(
        capsys, "neighbors", "b", "--space", str(space_file), "-k", "10"
    )
    assert exit_code == 0
    rows = data["details"]["neighbors"]
    assert len(rows) == 4
    assert rows[0]["codepoint"] == "U+0064"
    assert rows[0]["similarity"] == pytest.approx(1.0)


def test_neighbors_from_names_file(names_file, capsys):
    """The names source yields the DCES set."""
    exit_code, data = run_json(
        capsys, "neighbors", "U+0062", "--names", str(names_file)
    )
    assert exit_code == 0
    codepoints = [row["codepoint"] for row in data["details"]["neighbors"]]
    assert codepoints == ["U+0180", "U+0183", "U+0253", "U+1E03"]


def test_unknown_codepoint_is_reported(space_file, capsys):
    """Library errors come back in the failure envelope."""
    exit_code, data = run_json(capsys, "neighbors", "z", "--space", str(space_file))
    assert exit_code == 1
    assert data["ok"] is False
    assert data["command"] == "neighbors"
    assert data["details"]["error"] == "UnknownCodepoint"


def test_bad_codepoint_text(space_file, capsys):
    """Unparseable character arguments are CLI errors."""
    exit_code, data = run_json(
        capsys, "neighbors", "U+ZZZZ", "--space", str(space_file)
    )
    assert exit_code == 1
    assert data["details"]["error"] == "CLIError"


def test_missing_config_file(tmp_path, capsys):
    """Config problems exit with status 1."""
    exit_code, data = run_json(capsys, "run", str(tmp_path / "absent.yaml"))
    assert exit_code == 1
    assert data["details"]["error"] == "ConfigError"


def test_failure_details_in_text_mode(space_file, capsys):
    """Without --json a failure still prints its details."""
    assert cli.main(["neighbors", "z", "--space", str(space_file)]) == 1
    out = capsys.readouterr().out
    assert "error: UnknownCodepoint" in out


def test_render_writes_pgm(tmp_path, dejavu_path, capsys):
    """Rendered bitmaps are binary PGM files of the requested canvas."""
    target = tmp_path / "b.pgm"
    exit_code, data = run_json(
        capsys,
        "render",
        "b",
        "--font",
        str(dejavu_path),
        "--canvas",
        "32x32",
        "--size",
        "24",
        "--out",
        str(target),
    )
    assert exit_code == 0
    assert data["details"]["canvas"] == [32, 32]
    raw = target.read_bytes()
    assert raw.startswith(b"P5")
    assert b"32 32" in raw[:20]


def test_fetch_names_uses_cache_dir(tmp_path, capsys):
    """fetch-names downloads into --cache-dir."""
    response = MagicMock()
    response.text = "0062;LATIN SMALL LETTER B;Ll;0;L;;;;;N;;;0042;;0042\n"
    response.raise_for_status.return_value = None
    target = "glyphshield.spaces.names.requests.get"
    with patch(target, return_value=response) as get:
        exit_code, data = run_json(
            capsys,
            "--cache-dir",
            str(tmp_path),
            "fetch-names",
            "--version",
            "11.0.0",
        )
    assert exit_code == 0
    assert get.call_count == 1
    assert data["details"]["version"] == "11.0.0"
    assert data["details"]["path"].startswith(str(tmp_path))


def test_train_text_then_curve(toy_config, tmp_path, capsys):
    """A clean checkpoint from train-text feeds the curve command."""
    ckpt = tmp_path / "charcnn.ckpt"
    exit_code, data = run_json(
        capsys, "train-text", str(toy_config), "--out", str(ckpt)
    )
    assert exit_code == 0
    assert data["details"]["kind"] == "charcnn"
    assert data["details"]["epochs"] == 1
    assert ckpt.is_file()

    metrics = tmp_path / "curve.csv"
    exit_code, data = run_json(
        capsys,
        "curve",
        str(toy_config),
        "--checkpoint",
        str(ckpt),
        "--seeds",
        "0,1",
        "--out",
        str(metrics),
    )
    assert exit_code == 0
    assert data["details"]["rows"] == 4
    assert metrics.is_file()
    plot = json.loads(metrics.with_suffix(".json").read_text(encoding="utf-8"))
    assert plot["x"] == [0.0, 1.0]


def test_run_writes_experiment(toy_config, tmp_path, capsys):
    """The run command writes the artifact directory under output_dir."""
    exit_code, data = run_json(capsys, "--serial", "run", str(toy_config))
    assert exit_code == 0
    assert data["details"]["output"] == str(tmp_path / "runs" / "toy")
    assert data["details"]["rows"] == 2
    assert set(data["details"]["clean_accuracy"]) == {"charcnn"}
