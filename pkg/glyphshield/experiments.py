"""
Experiment orchestration: degradation curves, adversarial training,
extraction-point comparison and full config-driven runs.

An experiment directory holds::

    config.yaml            resolved configuration snapshot
    metrics.csv            one row per (model, p, seed)
    plots/<curve>.json     {curve_id, x, mean, std} per model curve
    checkpoints/*.ckpt     trained text models
    hset_train.json        replacements used for adversarial training
    hset_eval.json         replacements used by the evaluation attack
    split.json             intersection split (intersection protocol only)
    summary.json           clean accuracies and attack statistics

Plain meaning: Train the readers, attack them, and write down how they did.
"""

from __future__ import annotations

import csv
import json
import logging
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import BaseModel, Field

from glyphshield.attack import (
    SHIPPED_HSET,
    AttackSpec,
    HSet,
    SplitResult,
    curate_hset,
    intersection_split,
    load_hset,
    perturb_dataset,
    save_hset,
)
from glyphshield.classifier import (
    GlyphClassifierCheckpoint,
    build_glyph_dataset,
    train_glyph_classifier,
)
from glyphshield.codepoints import desk_charset, format_cp, letters, read_charset
from glyphshield.config import ExperimentConfig, GlyphConfig, load_config
from glyphshield.errors import DidNotConverge
from glyphshield.raster import (
    PRIMARY_FONT_FILE,
    AugmentationSpec,
    FontFace,
    load_font_set,
)
from glyphshield.runtime import get_runtime
from glyphshield.spaces.dces import dces_space
from glyphshield.spaces.i2ces import build_i2ces
from glyphshield.spaces.ices import build_ices
from glyphshield.spaces.models import NeighborSet
from glyphshield.spaces.names import (
    NamesTable,
    names_table_from_unicodedata,
    parse_names_list,
)
from glyphshield.spaces.search import neighbor_sets, top_k
from glyphshield.text.data import Dataset, load_csv, stratified_subsample
from glyphshield.text.models import TextModelCheckpoint
from glyphshield.text.training import TextTrainConfig, evaluate, train_text_classifier

logger = logging.getLogger(__name__)

METRICS_COLUMNS = (
    "experiment_id",
    "model_kind",
    "attack_space",
    "p",
    "seed",
    "accuracy",
    "n_samples",
)
EXTRACTION_OPTIONS = (
    ("conv", "single"),
    ("conv", "ave"),
    ("linear", "single"),
    ("linear", "ave"),
)

NeighborSource = Union[HSet, Mapping[int, NeighborSet]]


# ----------------------------------------------------------------------------
# Datasets and charsets
# ----------------------------------------------------------------------------


def load_dataset(
    path: Union[str, Path],
    train_n: Optional[int] = None,
    test_n: Optional[int] = None,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Load ``train.csv`` and ``test.csv`` from a directory, optionally subsampled.

    Args:
        path: Directory holding the two CSV files.
        train_n: Stratified training subsample size (None keeps all rows).
        test_n: Stratified test subsample size (None keeps all rows).
        seed: Subsample seed.

    Raises:
        MalformedCSV: A row cannot be parsed (with its line number).
        InsufficientSamples: A class cannot supply its share.

    Example:
        >>> train, test = load_dataset("data/ag_news", 8000, 2000)
        >>> train.class_counts()
        {0: 2000, 1: 2000, 2: 2000, 3: 2000}
    """
    root = Path(path)
    train = load_csv(root / "train.csv")
    test = load_csv(root / "test.csv", num_classes=train.num_classes)
    if train_n is not None:
        train = stratified_subsample(train, train_n, seed)
    if test_n is not None:
        test = stratified_subsample(test, test_n, seed)
    return train, test


def resolve_charset(name: str) -> list[int]:
    """"letters", "desk", or a charset file path."""
    if name == "letters":
        return letters()
    if name == "desk":
        return desk_charset()
    return read_charset(name)


def load_names(names_file: Optional[Union[str, Path]] = None) -> NamesTable:
    """Names table from a UnicodeData.txt file, or the bundled database."""
    if names_file is not None:
        return parse_names_list(names_file)
    return names_table_from_unicodedata()


# ----------------------------------------------------------------------------
# Metrics
# ----------------------------------------------------------------------------


class MetricsRow(BaseModel):
    """Accuracy of one model under one (p, seed) attack."""

    experiment_id: str
    model_kind: str
    attack_space: str
    p: float = Field(ge=0.0, le=1.0)
    seed: int
    accuracy: float = Field(ge=0.0, le=1.0)
    n_samples: int

    @property
    def curve_id(self) -> str:
        return f"{self.experiment_id}.{self.model_kind}.{self.attack_space}"


class MetricsTable(BaseModel):
    """Rows of (p, seed, accuracy) for one or more curves.

    Plain meaning: The scoreboard of an experiment.
    """

    rows: list[MetricsRow] = Field(default_factory=list)
    metadata: dict[str, Any] = Field(default_factory=dict)

    def extend(self, other: "MetricsTable") -> None:
        self.rows.extend(other.rows)

    def curve_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.curve_id, None)
        return list(seen)

    def plot_data(self, curve_id: str) -> dict[str, Any]:
        """Mean and population std of accuracy over seeds, per p."""
        by_p: dict[float, list[float]] = {}
        for row in self.rows:
            if row.curve_id == curve_id:
                by_p.setdefault(row.p, []).append(row.accuracy)
        if not by_p:
            raise KeyError(curve_id)
        xs = sorted(by_p)
        return {
            "curve_id": curve_id,
            "x": xs,
            "mean": [float(np.mean(by_p[p])) for p in xs],
            "std": [float(np.std(by_p[p])) for p in xs],
        }

    def write_csv(self, path: Union[str, Path]) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(METRICS_COLUMNS)
            for row in self.rows:
                writer.writerow([getattr(row, column) for column in METRICS_COLUMNS])
        return target

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "MetricsTable":
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            rows = [MetricsRow.model_validate(record) for record in reader]
        return cls(rows=rows)


# ----------------------------------------------------------------------------
# Degradation curves
# ----------------------------------------------------------------------------


def _replacement_table(neighbors: NeighborSource) -> Mapping[int, Sequence[int]]:
    return AttackSpec.from_source(0.0, neighbors).neighbors


class _ReplicaPool:
    """One private copy of a text model per worker thread.

    Layers keep forward caches on the instance, so concurrent cells never
    share a model.
    """

    def __init__(self, ckpt: TextModelCheckpoint, scratch: Path):
        self._path = ckpt.save(scratch / "replica.ckpt")
        self._local = threading.local()

    def get(self) -> TextModelCheckpoint:
        replica = getattr(self._local, "ckpt", None)
        if replica is None:
            replica = TextModelCheckpoint.load(self._path)
            self._local.ckpt = replica
        return replica


def degradation_curve(
    ckpt: TextModelCheckpoint,
    test: Dataset,
    neighbors: NeighborSource,
    p_grid: Sequence[float],
    seeds: Sequence[int],
    experiment_id: str = "",
    model_kind: Optional[str] = None,
    attack_space: str = "",
    workers: Optional[int] = None,
    batch_size: int = 128,
) -> MetricsTable:
    """Accuracy of a model under the perturbation attack for every (p, seed).

    For a fixed seed the attack draws are shared across p, so a character
    replaced at p is also replaced at every larger p. The p = 0 cells run on
    the untouched test set.

    Args:
        ckpt: Trained text model.
        test: Clean test set.
        neighbors: HSet or neighbor sets used by the attack.
        p_grid: Replacement probabilities, ascending, in [0, 1].
        seeds: Attack seeds.
        experiment_id: Recorded in every row.
        model_kind: Recorded in every row (default: the model's kind).
        attack_space: Recorded in every row.
        workers: Thread count (default from the runtime settings; serial
            mode forces 1).
        batch_size: Prediction batch size.

    Returns:
        MetricsTable with |p_grid| x |seeds| rows ordered by (p, seed).

    Raises:
        ValueError: p_grid is empty, unsorted or out of range.

    Example:
        >>> table = degradation_curve(ckpt, test, load_hset(), [0.0, 0.5], [0, 1])
        >>> len(table.rows)
        4

    Plain meaning: Measure how fast accuracy drops as more letters are swapped.
    """
    grid = [float(p) for p in p_grid]
    if not grid or grid != sorted(grid) or any(not 0.0 <= p <= 1.0 for p in grid):
        raise ValueError("p_grid must be a non-empty ascending list within [0, 1]")
    table = _replacement_table(neighbors)
    kind = model_kind or ckpt.kind
    cells = [(p, seed) for p in grid for seed in seeds]

    runtime = get_runtime()
    count = 1 if runtime.serial else (workers or runtime.effective_workers())

    def run_cell(model: TextModelCheckpoint, p: float, seed: int) -> MetricsRow:
        attacked = (
            test if p == 0.0 else perturb_dataset(test, AttackSpec(p, table, seed))
        )
        result = evaluate(model, attacked, batch_size)
        logger.info("%s p=%.2f seed=%d: accuracy %.4f", kind, p, seed, result.accuracy)
        return MetricsRow(
            experiment_id=experiment_id,
            model_kind=kind,
            attack_space=attack_space,
            p=p,
            seed=seed,
            accuracy=result.accuracy,
            n_samples=result.n_samples,
        )

    if count <= 1 or len(cells) <= 1:
        rows = [run_cell(ckpt, p, seed) for p, seed in cells]
    else:
        with tempfile.TemporaryDirectory(prefix="glyphshield-") as scratch:
            pool = _ReplicaPool(ckpt, Path(scratch))
            with ThreadPoolExecutor(max_workers=count) as executor:
                futures = [
                    executor.submit(lambda c: run_cell(pool.get(), *c), cell)
                    for cell in cells
                ]
                rows = [future.result() for future in futures]
    return MetricsTable(
        rows=rows,
        metadata={"p_grid": grid, "seeds": list(seeds), "pairs": _pair_count(table)},
    )


def _pair_count(table: Mapping[int, Sequence[int]]) -> int:
    return sum(len(targets) for targets in table.values())


# ----------------------------------------------------------------------------
# Adversarial training
# ----------------------------------------------------------------------------


def _epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def adversarial_train(
    base: Optional[TextModelCheckpoint],
    train: Dataset,
    hset_train: NeighborSource,
    p_train: float,
    config: Optional[TextTrainConfig] = None,
    kind: str = "vb",
    adv_epochs: Optional[int] = None,
) -> TextModelCheckpoint:
    """Clean training followed by training on freshly perturbed texts.

    Phase 1 is skipped when a base checkpoint is given; its model then
    continues training in place. Phase 2 draws new perturbations every
    epoch, seeded by (config.seed, epoch number).

    Args:
        base: Clean-trained checkpoint, or None to train one of ``kind``.
        train: Training texts.
        hset_train: Replacements the adversary may use during training.
        p_train: Replacement probability for the training perturbations.
        config: Training settings (shared by both phases).
        kind: Model kind for a fresh phase 1.
        adv_epochs: Phase-2 epoch count (default: config.epochs).

    Raises:
        ValueError: p_train outside [0, 1].

    Plain meaning: Teach the reader with already-disguised texts.
    """
    config = config or TextTrainConfig()
    table = AttackSpec.from_source(p_train, hset_train).neighbors
    if base is None:
        base = train_text_classifier(train, kind, config)
    phase2 = (
        config
        if adv_epochs is None
        else config.model_copy(update={"epochs": adv_epochs})
    )

    def perturbed_texts(epoch: int, fit_set: Dataset) -> list[str]:
        spec = AttackSpec(p_train, table, _epoch_seed(config.seed, epoch))
        return perturb_dataset(fit_set, spec).texts

    result = train_text_classifier(
        train,
        config=phase2,
        model=base.model,
        epoch_texts=perturbed_texts,
        epoch_offset=len(base.history),
    )
    history = [
        dict(record, phase=record.get("phase", "clean")) for record in base.history
    ]
    history += [dict(record, phase="adversarial") for record in result.history]
    snapshot = dict(result.config)
    snapshot["adversarial"] = {"p_train": p_train, "pairs": _pair_count(table)}
    return TextModelCheckpoint(
        model=result.model,
        history=history,
        train_accuracy=result.train_accuracy,
        val_accuracy=result.val_accuracy,
        config=snapshot,
    )


# ----------------------------------------------------------------------------
# Glyph classifier and extraction comparison
# ----------------------------------------------------------------------------


def train_glyph_from_config(glyph: GlyphConfig) -> GlyphClassifierCheckpoint:
    """Render the augmented dataset described by a GlyphConfig and train on it.

    Raises:
        DidNotConverge: The flagged checkpoint rides on the exception.
    """
    fonts = load_font_set(glyph.fonts, glyph.font_dirs or None)
    spec = AugmentationSpec(
        fonts=fonts.ids,
        sizes_pt=glyph.sizes_pt,
        rotation_deg=glyph.rotation_deg,
        noise_density=glyph.noise_density,
        seed=glyph.train.seed,
    )
    dataset = build_glyph_dataset(
        resolve_charset(glyph.charset),
        fonts,
        spec,
        val_fraction=glyph.val_fraction,
        seed=glyph.train.seed,
    )
    return train_glyph_classifier(dataset, glyph.train)


def compare_extraction(
    ckpt: GlyphClassifierCheckpoint,
    probes: Iterable[int],
    options: Sequence[tuple[str, str]] = EXTRACTION_OPTIONS,
    k: int = 10,
    font: Optional[FontFace] = None,
) -> dict[str, Any]:
    """Nearest neighbors of probe characters under each extraction option.

    Each option is a (layer_choice, ave_choice) pair; the I2CES space for it
    is built over the whole classifier charset.

    Raises:
        UnknownCodepoint: A probe is not a classifier class or was skipped
            as blank.

    Example:
        >>> report = compare_extraction(ckpt, [ord("z")])
        >>> [option["dim"] for option in report["options"]][:2]
        [1152, 1152]

    Plain meaning: See which layer gives the most convincing look-alikes.
    """
    probe_font = font or load_font_set([PRIMARY_FONT_FILE]).primary
    targets = list(probes)
    entries = []
    for layer_choice, ave_choice in options:
        space = build_i2ces(
            ckpt.charset,
            ckpt,
            layer_choice=layer_choice,
            ave_choice=ave_choice,
            font=probe_font,
        )
        lists = {}
        for cp in targets:
            found = top_k(space, cp, k)
            lists[format_cp(cp)] = [
                {"codepoint": format_cp(other), "char": chr(other), "similarity": sim}
                for other, sim in zip(found.neighbors, found.similarities)
            ]
        entries.append(
            {
                "option": f"{layer_choice}+{ave_choice}",
                "layer_choice": layer_choice,
                "ave_choice": ave_choice,
                "dim": space.dim,
                "neighbors": lists,
            }
        )
    return {"checkpoint_id": ckpt.checkpoint_id, "k": k, "options": entries}


# ----------------------------------------------------------------------------
# Full runs
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackPlan:
    """Replacements for adversarial training and for the evaluation attack."""

    space: str
    train_hset: HSet
    eval_hset: HSet
    split: Optional[SplitResult] = None


def _glyph_checkpoint(config: ExperimentConfig) -> GlyphClassifierCheckpoint:
    if config.glyph.checkpoint is not None:
        return GlyphClassifierCheckpoint.load(config.glyph.checkpoint)
    try:
        return train_glyph_from_config(config.glyph)
    except DidNotConverge as exc:
        logger.warning("Using unconverged glyph classifier: %s", exc)
        return exc.checkpoint


def _source_hset(config: ExperimentConfig, names: Optional[NamesTable]) -> HSet:
    attack = config.attack
    targets = resolve_charset(attack.charset)
    if attack.space == "hset":
        return load_hset(attack.hset_file or SHIPPED_HSET)
    if attack.space == "dces":
        table = names if names is not None else load_names(attack.names_file)
        return curate_hset(dces_space(table, targets), threshold=1.0, space_kind="dces")
    if attack.space == "ices":
        pool = sorted(set(resolve_charset(config.glyph.charset)) | set(targets))
        font = load_font_set([config.train.font_file]).primary
        space = build_ices(pool, font)
    else:
        glyph = _glyph_checkpoint(config)
        space = build_i2ces(glyph.charset, glyph)
    present = [cp for cp in targets if cp in space]
    return curate_hset(
        neighbor_sets(space, attack.k, present),
        threshold=attack.threshold,
        space_kind=attack.space,
    )


def build_attack_plan(config: ExperimentConfig) -> AttackPlan:
    """Resolve the configured space and protocol into train/eval replacements.

    Raises:
        LeakageError: The intersection split is not disjoint.
    """
    attack = config.attack
    names = load_names(attack.names_file) if attack.protocol == "intersection" else None
    source = _source_hset(config, names)
    if attack.protocol == "free":
        return AttackPlan(space=attack.space, train_hset=source, eval_hset=source)
    assert names is not None
    dces = dces_space(names, resolve_charset(attack.charset))
    split = intersection_split(source, dces, seed=config.train.seed)
    split.verify_disjoint()
    return AttackPlan(
        space=attack.space,
        train_hset=split.train_hset(f"{attack.space}+dces"),
        eval_hset=split.eval_hset(f"{attack.space}+dces"),
        split=split,
    )


def _checkpoint_name(model_id: str) -> str:
    return model_id.replace("+", "_") + ".ckpt"


def run_experiment(
    config: Union[ExperimentConfig, str, Path], workers: Optional[int] = None
) -> Path:
    """Run a configured experiment end to end and write its artifacts.

    Clean models are trained once per kind; adversarial entries continue
    from a reloaded copy of the clean checkpoint of their kind.

    Args:
        config: An ExperimentConfig or the path of its YAML file.
        workers: Threads for curve cells (default from runtime settings).

    Returns:
        The artifact directory (``output_dir / experiment_id``).

    Raises:
        ConfigError: The configuration is invalid or references missing inputs.
        LeakageError: Train and eval replacements overlap.

    Side effects:
        Writes the artifact directory described in the module docstring.

    Plain meaning: Do the whole experiment from one recipe file.
    """
    if not isinstance(config, ExperimentConfig):
        config = load_config(config)
    out = Path(config.output_dir) / config.experiment_id
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "plots").mkdir(exist_ok=True)
    (out / "config.yaml").write_text(
        yaml.safe_dump(config.snapshot(), sort_keys=False), encoding="utf-8"
    )

    plan = build_attack_plan(config)
    save_hset(plan.train_hset, out / "hset_train.json")
    save_hset(plan.eval_hset, out / "hset_eval.json")
    if plan.split is not None:
        (out / "split.json").write_text(
            json.dumps(plan.split.to_dict(), indent=2) + "\n", encoding="utf-8"
        )

    train, test = load_dataset(
        config.dataset.path,
        config.dataset.train_n,
        config.dataset.test_n,
        config.dataset.seed,
    )
    metrics = MetricsTable(metadata={"experiment_id": config.experiment_id})
    clean_paths: dict[str, Path] = {}
    clean_accuracy: dict[str, float] = {}
    for entry in config.models:
        if entry.kind not in clean_paths:
            clean = train_text_classifier(train, entry.kind, config.train)
            target = out / "checkpoints" / _checkpoint_name(entry.kind)
            clean_paths[entry.kind] = clean.save(target)
        if entry.adversarial:
            ckpt = adversarial_train(
                TextModelCheckpoint.load(clean_paths[entry.kind]),
                train,
                plan.train_hset,
                config.attack.p_train,
                config.train,
                adv_epochs=config.attack.adv_epochs,
            )
            ckpt.save(out / "checkpoints" / _checkpoint_name(entry.model_id))
        else:
            ckpt = TextModelCheckpoint.load(clean_paths[entry.kind])
        curve = degradation_curve(
            ckpt,
            test,
            plan.eval_hset,
            config.p_grid,
            config.seeds,
            experiment_id=config.experiment_id,
            model_kind=entry.model_id,
            attack_space=plan.space,
            workers=workers,
        )
        metrics.extend(curve)
        clean_accuracy[entry.model_id] = evaluate(ckpt, test).accuracy

    metrics.write_csv(out / "metrics.csv")
    for curve_id in metrics.curve_ids():
        (out / "plots" / f"{curve_id}.json").write_text(
            json.dumps(metrics.plot_data(curve_id), indent=2) + "\n", encoding="utf-8"
        )
    summary = {
        "experiment_id": config.experiment_id,
        "train_samples": len(train),
        "test_samples": len(test),
        "clean_accuracy": clean_accuracy,
        "attack": {
            "space": plan.space,
            "protocol": config.attack.protocol,
            "train_pairs": plan.train_hset.pair_count,
            "eval_pairs": plan.eval_hset.pair_count,
        },
        "rows": len(metrics.rows),
    }
    if plan.split is not None:
        summary["split"] = {
            "characters": len(plan.split.halves),
            "excluded": len(plan.split.excluded),
        }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    logger.info("Wrote experiment %s to %s", config.experiment_id, out)
    return out
