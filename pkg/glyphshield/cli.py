"""Command line interface for glyphshield.

Plain meaning: Run glyphshield tasks from the terminal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional

from glyphshield import experiments
from glyphshield.attack import SHIPPED_HSET, AttackSpec, load_hset, vp_perturb
from glyphshield.classifier import GlyphClassifierCheckpoint
from glyphshield.codepoints import format_cp, parse_cp
from glyphshield.config import ExperimentConfig, load_config
from glyphshield.errors import DidNotConverge, GlyphShieldError
from glyphshield.raster import (
    CLASSIFIER_CANVAS,
    ICES_CANVAS,
    ICES_SIZE_PT,
    PRIMARY_FONT_FILE,
    PROBE_SIZE_PT,
    load_font_set,
    rasterize_centered,
    rotate,
    write_pgm,
)
from glyphshield.runtime import get_runtime, seed_from_env, set_runtime
from glyphshield.spaces.dces import dces_neighbors
from glyphshield.spaces.i2ces import build_i2ces
from glyphshield.spaces.ices import build_ices
from glyphshield.spaces.models import EmbeddingSpace
from glyphshield.spaces.names import DEFAULT_UNICODE_VERSION, fetch_names_list
from glyphshield.spaces.search import top_k
from glyphshield.text.data import Dataset
from glyphshield.text.models import TextModelCheckpoint
from glyphshield.text.training import evaluate, train_text_classifier


class CLIError(Exception):
    """Raised when CLI execution fails.

    Plain meaning: The CLI could not complete the requested command.
    """


def main(argv: Optional[list[str]] = None) -> int:
    """Run the glyphshield CLI.

    Plain meaning: Parse arguments, execute a command, and return an exit code.
    """

    parser = _build_parser()
    args = parser.parse_args(argv)

    if not hasattr(args, "handler"):
        parser.print_help()
        return 1

    _configure_logging(args.verbose, args.debug)
    try:
        set_runtime(serial=args.serial, workers=args.workers, cache_dir=args.cache_dir)
        output = args.handler(args)
    except CLIError as exc:
        output = _failure(args, str(exc), "CLIError")
    except GlyphShieldError as exc:
        output = _failure(args, str(exc), type(exc).__name__)
    except (OSError, ValueError) as exc:
        output = _failure(args, str(exc), type(exc).__name__)

    _emit_output(output, args.json, args.verbose)
    return 0 if output.get("ok") else 1


def _failure(args: argparse.Namespace, message: str, error: str) -> dict[str, Any]:
    return {
        "command": getattr(args, "command_path", "unknown"),
        "ok": False,
        "message": message,
        "details": {"error": error},
    }


def _configure_logging(verbose: bool, debug: bool) -> None:
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glyphshield",
        description="Homoglyph attack and defense toolkit",
    )
    parser.add_argument(
        "--json",
        action="store_true",
        help="Emit machine-readable JSON output",
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Show verbose output and INFO logging",
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable DEBUG logging",
    )
    parser.add_argument(
        "--serial",
        action="store_true",
        help="Force single-worker, bit-reproducible execution",
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=1,
        help="Worker threads for independent evaluation cells (default: 1)",
    )
    parser.add_argument(
        "--cache-dir",
        help="Cache directory for downloaded data (default: ~/.cache/glyphshield)",
    )

    subparsers = parser.add_subparsers(dest="command")

    render = subparsers.add_parser(
        "render", help="Export a centered glyph bitmap as PGM"
    )
    render.add_argument("char", help="Character or U+XXXX codepoint")
    _add_font_args(render)
    render.add_argument(
        "--size",
        type=int,
        default=PROBE_SIZE_PT,
        help="Font size in points (default: 80)",
    )
    render.add_argument(
        "--canvas",
        type=_canvas,
        default=CLASSIFIER_CANVAS,
        help="Canvas as WIDTHxHEIGHT (default: 100x100)",
    )
    render.add_argument("--rotate", type=float, default=0.0, help="Rotation in degrees")
    render.add_argument("--out", required=True, help="Output .pgm path")
    render.set_defaults(handler=_handle_render, command_path="render")

    build_space = subparsers.add_parser(
        "build-space", help="Build and save an ICES or I2CES embedding space"
    )
    build_space.add_argument("kind", choices=["ices", "i2ces"], help="Space kind")
    build_space.add_argument(
        "--charset",
        default="letters",
        help="'letters', 'desk' or a charset file (default: letters)",
    )
    _add_font_args(build_space)
    build_space.add_argument(
        "--checkpoint", help="Glyph-classifier checkpoint (required for i2ces)"
    )
    build_space.add_argument(
        "--layer",
        choices=["conv", "linear"],
        default="conv",
        help="I2CES extraction layer",
    )
    build_space.add_argument(
        "--ave",
        choices=["single", "ave"],
        default="single",
        help="I2CES probe averaging",
    )
    build_space.add_argument("--out", required=True, help="Output space file")
    build_space.set_defaults(handler=_handle_build_space, command_path="build-space")

    neighbors = subparsers.add_parser(
        "neighbors", help="Show a character's nearest neighbors or its DCES set"
    )
    neighbors.add_argument("char", help="Character or U+XXXX codepoint")
    source = neighbors.add_mutually_exclusive_group(required=True)
    source.add_argument("--space", help="Embedding space file")
    source.add_argument(
        "--names",
        nargs="?",
        const="",
        help="DCES from a UnicodeData.txt file (bare flag: bundled Unicode database)",
    )
    neighbors.add_argument(
        "-k", type=int, default=10, help="Neighbors to show (default: 10)"
    )
    neighbors.set_defaults(handler=_handle_neighbors, command_path="neighbors")

    attack = subparsers.add_parser("attack", help="Perturb a UTF-8 text file")
    attack.add_argument("input", help="Input text file")
    attack.add_argument(
        "--hset", help="Replacement set file (default: shipped a-z/A-Z set)"
    )
    attack.add_argument(
        "--p", type=float, required=True, help="Replacement probability"
    )
    attack.add_argument(
        "--seed", type=int, help="Attack seed (default: $PERTURB_SEED, else 0)"
    )
    attack.add_argument("--out", required=True, help="Output text file")
    attack.set_defaults(handler=_handle_attack, command_path="attack")

    train_glyph = subparsers.add_parser(
        "train-glyph", help="Train the glyph classifier"
    )
    _add_config_args(train_glyph)
    train_glyph.add_argument("--max-epochs", type=int, help="Override glyph max_epochs")
    train_glyph.set_defaults(handler=_handle_train_glyph, command_path="train-glyph")

    train_text = subparsers.add_parser(
        "train-text", help="Train a clean text classifier"
    )
    _add_config_args(train_text)
    train_text.add_argument(
        "--kind",
        choices=["charcnn", "vb", "ices"],
        help="Model kind (default: first model)",
    )
    train_text.add_argument("--epochs", type=int, help="Override training epochs")
    train_text.set_defaults(handler=_handle_train_text, command_path="train-text")

    adv_train = subparsers.add_parser(
        "adv-train", help="Adversarially train a text classifier"
    )
    _add_config_args(adv_train)
    adv_train.add_argument(
        "--kind", choices=["charcnn", "vb", "ices"], default="vb", help="Model kind"
    )
    adv_train.add_argument("--base", help="Clean checkpoint to continue from")
    adv_train.add_argument("--p-train", type=float, help="Override attack.p_train")
    adv_train.set_defaults(handler=_handle_adv_train, command_path="adv-train")

    curve = subparsers.add_parser(
        "curve", help="Accuracy-vs-p curve for one checkpoint"
    )
    _add_config_args(curve)
    curve.add_argument("--checkpoint", required=True, help="Text-model checkpoint")
    _add_grid_args(curve)
    curve.set_defaults(handler=_handle_curve, command_path="curve")

    compare = subparsers.add_parser(
        "compare-extraction",
        help="Compare I2CES extraction options on probe characters",
    )
    compare.add_argument(
        "--checkpoint", required=True, help="Glyph-classifier checkpoint"
    )
    compare.add_argument(
        "--probes", required=True, help="Probe characters, e.g. 'zZo0'"
    )
    compare.add_argument(
        "-k", type=int, default=10, help="Neighbors per probe (default: 10)"
    )
    compare.add_argument("--out", help="Write the JSON report to this file")
    compare.set_defaults(
        handler=_handle_compare_extraction, command_path="compare-extraction"
    )

    run = subparsers.add_parser("run", help="Run a full experiment from a config file")
    run.add_argument("config", help="Experiment YAML file")
    run.add_argument("--output-dir", help="Override output_dir")
    _add_grid_args(run)
    run.set_defaults(handler=_handle_run, command_path="run")

    fetch = subparsers.add_parser(
        "fetch-names", help="Download and cache UnicodeData.txt"
    )
    fetch.add_argument(
        "--version",
        default=DEFAULT_UNICODE_VERSION,
        help=f"Unicode version (default: {DEFAULT_UNICODE_VERSION})",
    )
    fetch.add_argument("--force", action="store_true", help="Download even if cached")
    fetch.set_defaults(handler=_handle_fetch_names, command_path="fetch-names")

    return parser


def _add_font_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--font",
        default=PRIMARY_FONT_FILE,
        help=f"Font path or file name (default: {PRIMARY_FONT_FILE})",
    )
    parser.add_argument(
        "--font-dir",
        action="append",
        dest="font_dirs",
        help="Directory searched for font file names (repeatable)",
    )


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="Experiment YAML file")
    parser.add_argument("--out", help="Output checkpoint or file path")


def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--p-grid", type=_float_list, help="Comma-separated p values overriding p_grid"
    )
    parser.add_argument(
        "--seeds", type=_int_list, help="Comma-separated seeds overriding seeds"
    )


def _canvas(text: str) -> tuple[int, int]:
    try:
        width, height = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected WIDTHxHEIGHT, got {text!r}"
        ) from None
    return width, height


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _parse_char(text: str) -> int:
    try:
        return parse_cp(text)
    except ValueError as exc:
        raise CLIError(str(exc)) from exc


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    return config.with_overrides(
        p_grid=getattr(args, "p_grid", None),
        seeds=getattr(args, "seeds", None),
        output_dir=getattr(args, "output_dir", None),
    )


def _artifact_path(
    config: ExperimentConfig, override: Optional[str], name: str
) -> Path:
    if override:
        return Path(override)
    return Path(config.output_dir) / config.experiment_id / name


def _handle_render(args: argparse.Namespace) -> dict[str, Any]:
    """Render one glyph to a PGM file."""
    cp = _parse_char(args.char)
    font = load_font_set([args.font], args.font_dirs).primary
    bitmap = rasterize_centered(cp, font, args.size, args.canvas)
    if args.rotate:
        bitmap = rotate(bitmap, args.rotate)
    target = write_pgm(bitmap, args.out)
    return {
        "command": args.command_path,
        "ok": True,
        "message": f"Wrote {format_cp(cp)} to {target}",
        "details": {
            "codepoint": format_cp(cp),
            "font": font.name,
            "size_pt": args.size,
            "canvas": list(args.canvas),
            "output": str(target),
        },
    }


def _handle_build_space(args: argparse.Namespace) -> dict[str, Any]:
    """Build an embedding space over a charset and save it."""
    charset = experiments.resolve_charset(args.charset)
    font = load_font_set([args.font], args.font_dirs).primary
    if args.kind == "ices":
        space = build_ices(charset, font, ICES_CANVAS, ICES_SIZE_PT)
    else:
        if not args.checkpoint:
            raise CLIError("build-space i2ces needs --checkpoint")
        ckpt = GlyphClassifierCheckpoint.load(args.checkpoint)
        space = build_i2ces(charset, ckpt, args.layer, args.ave, font=font)
    target = space.save(args.out)
    return {
        "command": args.command_path,
        "ok": True,
        "message": f"Wrote {args.kind} space ({len(space)} x {space.dim}) to {target}",
        "details": {
            "kind": space.kind,
            "dim": space.dim,
            "entries": len(space),
            "skipped": dict(space.build_meta.skipped),
            "output": str(target),
        },
    }


def _handle_neighbors(args: argparse.Namespace) -> dict[str, Any]:
    """Print top-k neighbors from a space, or the DCES set from names data."""
    cp = _parse_char(args.char)
    if args.space:
        found = top_k(EmbeddingSpace.load(args.space), cp, args.k)
        source = args.space
    else:
        table = experiments.load_names(args.names or None)
        found = dces_neighbors(cp, table)
        source = table.source
    rows = [
        {"codepoint": format_cp(other), "char": chr(other), "similarity": sim}
        for other, sim in zip(found.neighbors, found.similarities)
    ]
    lines = [
        f"{row['codepoint']}  {row['char']}  {row['similarity']:.4f}" for row in rows
    ]
    return {
        "command": args.command_path,
        "ok": True,
        "message": "\n".join(lines) if lines else f"{format_cp(cp)} has no neighbors",
        "details": {"codepoint": format_cp(cp), "source": source, "neighbors": rows},
    }


def _handle_attack(args: argparse.Namespace) -> dict[str, Any]:
    """Perturb a text file with the visual perturbation attack."""
    seed = args.seed if args.seed is not None else seed_from_env(0)
    hset = load_hset(args.hset or SHIPPED_HSET)
    spec = AttackSpec.from_source(args.p, hset, seed=seed)
    with open(args.input, encoding="utf-8", newline="") as handle:
        text = handle.read()
    perturbed = vp_perturb(text, spec)
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        handle.write(perturbed)
    changed = sum(1 for a, b in zip(text, perturbed) if a != b)
    return {
        "command": args.command_path,
        "ok": True,
        "message": f"Replaced {changed} of {len(text)} characters; wrote {args.out}",
        "details": {"p": args.p, "seed": seed, "replaced": changed, "output": args.out},
    }


def _handle_train_glyph(args: argparse.Namespace) -> dict[str, Any]:
    """Train the glyph classifier described by the config's glyph section."""
    config = _load_config(args)
    glyph = config.glyph
    if args.max_epochs is not None:
        glyph = glyph.model_copy(
            update={
                "train": glyph.train.model_copy(
                    update={"max_epochs": args.max_epochs}
                )
            }
        )
    target = _artifact_path(config, args.out, "glyph.ckpt")
    try:
        ckpt = experiments.train_glyph_from_config(glyph)
    except DidNotConverge as exc:
        exc.checkpoint.save(target)
        return {
            "command": args.command_path,
            "ok": False,
            "message": f"{exc}; flagged checkpoint saved to {target}",
            "details": {"error": "DidNotConverge", "output": str(target)},
        }
    ckpt.save(target)
    return {
        "command": args.command_path,
        "ok": True,
        "message": f"Glyph classifier reached {ckpt.val_accuracy:.4f}; wrote {target}",
        "details": {
            "classes": ckpt.num_classes,
            "val_accuracy": ckpt.val_accuracy,
            "epochs": len(ckpt.history),
            "checkpoint_id": ckpt.checkpoint_id,
            "output": str(target),
        },
    }


def _text_result(
    args: argparse.Namespace, ckpt: TextModelCheckpoint, test: Dataset, target: Path
) -> dict[str, Any]:
    clean = evaluate(ckpt, test)
    ckpt.save(target)
    return {
        "command": args.command_path,
        "ok": True,
        "message": (
            f"{ckpt.kind} clean test accuracy {clean.accuracy:.4f}; wrote {target}"
        ),
        "details": {
            "kind": ckpt.kind,
            "epochs": len(ckpt.history),
            "val_accuracy": ckpt.val_accuracy,
            "test_accuracy": clean.accuracy,
            "output": str(target),
        },
    }


def _handle_train_text(args: argparse.Namespace) -> dict[str, Any]:
    """Train a clean text classifier on the configured dataset."""
    config = _load_config(args)
    kind = args.kind or config.models[0].kind
    train_config = config.train
    if args.epochs is not None:
        train_config = train_config.model_copy(update={"epochs": args.epochs})
    data = config.dataset
    train, test = experiments.load_dataset(
        data.path, data.train_n, data.test_n, data.seed
    )
    ckpt = train_text_classifier(train, kind, train_config)
    target = _artifact_path(config, args.out, f"{kind}.ckpt")
    return _text_result(args, ckpt, test, target)


def _handle_adv_train(args: argparse.Namespace) -> dict[str, Any]:
    """Adversarially train with the configured attack's train replacements."""
    config = _load_config(args)
    data = config.dataset
    train, test = experiments.load_dataset(
        data.path, data.train_n, data.test_n, data.seed
    )
    plan = experiments.build_attack_plan(config)
    base = TextModelCheckpoint.load(args.base) if args.base else None
    p_train = args.p_train if args.p_train is not None else config.attack.p_train
    ckpt = experiments.adversarial_train(
        base,
        train,
        plan.train_hset,
        p_train,
        config.train,
        kind=base.kind if base else args.kind,
        adv_epochs=config.attack.adv_epochs,
    )
    target = _artifact_path(config, args.out, f"at_{ckpt.kind}.ckpt")
    return _text_result(args, ckpt, test, target)


def _handle_curve(args: argparse.Namespace) -> dict[str, Any]:
    """Degradation curve of one checkpoint under the configured attack."""
    config = _load_config(args)
    ckpt = TextModelCheckpoint.load(args.checkpoint)
    data = config.dataset
    _, test = experiments.load_dataset(data.path, data.train_n, data.test_n, data.seed)
    plan = experiments.build_attack_plan(config)
    table = experiments.degradation_curve(
        ckpt,
        test,
        plan.eval_hset,
        config.p_grid,
        config.seeds,
        experiment_id=config.experiment_id,
        attack_space=plan.space,
        workers=get_runtime().effective_workers(),
    )
    target = _artifact_path(config, args.out, f"curve_{ckpt.kind}.csv")
    table.write_csv(target)
    plot = table.plot_data(table.curve_ids()[0])
    plot_path = target.with_suffix(".json")
    plot_path.write_text(json.dumps(plot, indent=2) + "\n", encoding="utf-8")
    lines = [
        f"p={p:.2f}  {mean:.4f} +/- {std:.4f}"
        for p, mean, std in zip(plot["x"], plot["mean"], plot["std"])
    ]
    return {
        "command": args.command_path,
        "ok": True,
        "message": "\n".join(lines),
        "details": {
            "metrics": str(target),
            "plot": str(plot_path),
            "rows": len(table.rows),
        },
    }


def _handle_compare_extraction(args: argparse.Namespace) -> dict[str, Any]:
    """Top-k neighbors of probe characters under each extraction option."""
    ckpt = GlyphClassifierCheckpoint.load(args.checkpoint)
    probes = [ord(ch) for ch in dict.fromkeys(args.probes) if not ch.isspace()]
    if not probes:
        raise CLIError("--probes needs at least one character")
    report = experiments.compare_extraction(ckpt, probes, k=args.k)
    if args.out:
        Path(args.out).write_text(
            json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    lines = []
    for option in report["options"]:
        for probe, found in option["neighbors"].items():
            chars = " ".join(item["char"] for item in found)
            lines.append(f"{option['option']:<14} {probe}: {chars}")
    return {
        "command": args.command_path,
        "ok": True,
        "message": "\n".join(lines),
        "details": {
            "checkpoint_id": report["checkpoint_id"],
            "dims": {option["option"]: option["dim"] for option in report["options"]},
            "output": args.out or "stdout",
        },
    }


def _handle_run(args: argparse.Namespace) -> dict[str, Any]:
    """Run a full experiment and write its artifact directory."""
    config = _load_config(args)
    out = experiments.run_experiment(config, workers=get_runtime().effective_workers())
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    return {
        "command": args.command_path,
        "ok": True,
        "message": f"Wrote experiment {config.experiment_id} to {out}",
        "details": {
            "output": str(out),
            "rows": summary["rows"],
            "clean_accuracy": summary["clean_accuracy"],
        },
    }


def _handle_fetch_names(args: argparse.Namespace) -> dict[str, Any]:
    """Download UnicodeData.txt into the cache."""
    path = fetch_names_list(args.version, force_refresh=args.force)
    return {
        "command": args.command_path,
        "ok": True,
        "message": f"Unicode {args.version} names cached at {path}",
        "details": {"version": args.version, "path": str(path)},
    }


def _emit_output(output: dict[str, Any], json_output: bool, verbose: bool) -> None:
    if json_output:
        print(json.dumps(output, ensure_ascii=False))
        return

    message = output.get("message", "")
    if message:
        print(message)

    details = output.get("details") or {}
    if details and (verbose or not output.get("ok")):
        if message:
            print()
        for key, value in details.items():
            print(f"{key}: {value}")


if __name__ == "__main__":
    sys.exit(main())
