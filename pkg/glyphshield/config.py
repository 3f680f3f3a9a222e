"""
Experiment configuration: YAML files, JSON-schema checks and typed models.

Files are validated against ``schemas/experiment.schema.json`` first, then
parsed into pydantic models. Every failure becomes a ConfigError naming the
offending field. Relative paths resolve against the config file's folder.

Plain meaning: Read an experiment recipe and make sure it makes sense.
"""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Literal, Optional, Union

import yaml
from jsonschema import Draft202012Validator
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from glyphshield.classifier import GlyphTrainConfig
from glyphshield.errors import ConfigError
from glyphshield.raster import (
    DEFAULT_FONT_FILES,
    DEFAULT_NOISE_DENSITY,
    DEFAULT_ROTATIONS,
    DEFAULT_SIZES_PT,
)
from glyphshield.text.training import TextTrainConfig

SCHEMA_DIR = Path(__file__).resolve().parent / "schemas"
DEFAULT_P_GRID = (0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_SEEDS = (0, 1, 2)


@lru_cache(maxsize=None)
def schema_validator(name: str) -> Draft202012Validator:
    """Validator for one of the packaged JSON schemas."""
    schema = json.loads((SCHEMA_DIR / name).read_text(encoding="utf-8"))
    return Draft202012Validator(schema)


def schema_errors(validator: Draft202012Validator, data: Any) -> Iterable[str]:
    """Yield "dotted.path: message" for every schema violation."""
    for error in sorted(validator.iter_errors(data), key=str):
        path = ".".join(str(item) for item in error.path) or "<root>"
        yield f"{path}: {error.message}"


def _first_error_field(validator: Draft202012Validator, data: Any) -> Optional[str]:
    errors = sorted(validator.iter_errors(data), key=str)
    if not errors:
        return None
    return ".".join(str(item) for item in errors[0].path) or "<root>"


def _config_error(exc: ValidationError) -> ConfigError:
    first = exc.errors()[0]
    field = ".".join(str(item) for item in first["loc"]) or "<root>"
    return ConfigError(first["msg"], field)


class DatasetConfig(BaseModel):
    """Where the texts live and how many to use."""

    path: Path
    train_n: Optional[int] = 8000
    test_n: Optional[int] = 2000
    seed: int = 0


class ModelEntry(BaseModel):
    """One text model to train and attack."""

    kind: Literal["charcnn", "vb", "ices"]
    adversarial: bool = False

    @property
    def model_id(self) -> str:
        return f"at+{self.kind}" if self.adversarial else self.kind


class AttackConfig(BaseModel):
    """Which replacement set attacks the models, and how it is split."""

    space: Literal["hset", "ices", "i2ces", "dces"] = "hset"
    hset_file: Optional[Path] = None
    names_file: Optional[Path] = None
    charset: str = "letters"
    k: int = Field(default=20, ge=1)
    threshold: float = Field(default=0.75, gt=0.0, le=1.0)
    protocol: Literal["free", "intersection"] = "free"
    p_train: float = Field(default=0.5, ge=0.0, le=1.0)
    adv_epochs: int = Field(default=5, ge=0)

    @model_validator(mode="after")
    def _split_needs_second_space(self) -> "AttackConfig":
        if self.protocol == "intersection" and self.space == "dces":
            raise ValueError(
                "the intersection protocol splits a non-DCES space against DCES"
            )
        return self


class GlyphConfig(BaseModel):
    """Glyph-classifier data and training settings (I2CES attacks)."""

    checkpoint: Optional[Path] = None
    charset: str = "desk"
    fonts: list[str] = Field(default_factory=lambda: list(DEFAULT_FONT_FILES))
    font_dirs: list[str] = Field(default_factory=list)
    sizes_pt: list[int] = Field(default_factory=lambda: list(DEFAULT_SIZES_PT))
    rotation_deg: list[float] = Field(default_factory=lambda: list(DEFAULT_ROTATIONS))
    noise_density: float = DEFAULT_NOISE_DENSITY
    val_fraction: float = 0.1
    train: GlyphTrainConfig = Field(default_factory=GlyphTrainConfig)


class ExperimentConfig(BaseModel):
    """A complete attack/defense experiment.

    Plain meaning: Everything needed to rerun one experiment.
    """

    experiment_id: str
    output_dir: Path = Path("runs")
    dataset: DatasetConfig
    models: list[ModelEntry]
    attack: AttackConfig = Field(default_factory=AttackConfig)
    p_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_P_GRID))
    seeds: list[int] = Field(default_factory=lambda: list(DEFAULT_SEEDS))
    train: TextTrainConfig = Field(default_factory=TextTrainConfig)
    glyph: GlyphConfig = Field(default_factory=GlyphConfig)

    @field_validator("p_grid")
    @classmethod
    def _sorted_grid(cls, value: list[float]) -> list[float]:
        if any(not 0.0 <= p <= 1.0 for p in value):
            raise ValueError("p values must lie in [0, 1]")
        if value != sorted(value):
            raise ValueError("p_grid must be sorted ascending")
        return value

    @field_validator("seeds")
    @classmethod
    def _unique_seeds(cls, value: list[int]) -> list[int]:
        if len(set(value)) != len(value):
            raise ValueError("seeds must be unique")
        return value

    def snapshot(self) -> dict[str, Any]:
        """JSON-safe dict of the resolved config."""
        return json.loads(self.model_dump_json())

    def with_overrides(self, **updates: Any) -> "ExperimentConfig":
        """Copy with top-level fields replaced (None values are ignored).

        Raises:
            ConfigError: An override fails validation.
        """
        data = self.model_dump()
        data.update({key: value for key, value in updates.items() if value is not None})
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as exc:
            raise _config_error(exc) from exc


class ConfigLoader:
    """Load experiment YAML into ExperimentConfig objects.

    Args:
        schema_name: Packaged schema used for validation.

    Example:
        >>> config = ConfigLoader().load_from_file("experiments/ag_desk.yaml")

    Plain meaning: Read and check an experiment file.
    """

    def __init__(self, schema_name: str = "experiment.schema.json"):
        self._validator = schema_validator(schema_name)

    def load_from_file(
        self, path: Union[str, Path], check_paths: bool = True
    ) -> ExperimentConfig:
        """Load, validate and (optionally) check referenced paths.

        Raises:
            ConfigError: Unreadable file, invalid YAML, schema or model
                violations, or missing referenced inputs.
        """
        source = Path(path)
        try:
            text = source.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"Cannot read config {source}: {exc}") from exc
        config = self.load_from_text(text, base_dir=source.resolve().parent)
        if check_paths:
            self.check_paths(config)
        return config

    def load_from_text(
        self, text: str, base_dir: Optional[Path] = None
    ) -> ExperimentConfig:
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"Invalid YAML: {exc}") from exc
        return self.load_from_dict(data, base_dir=base_dir)

    def load_from_dict(
        self, data: dict[str, Any], base_dir: Optional[Path] = None
    ) -> ExperimentConfig:
        errors = list(self.validate_data(data))
        if errors:
            field = _first_error_field(self._validator, data) or "<root>"
            raise ConfigError("schema validation failed: " + "; ".join(errors), field)
        try:
            config = ExperimentConfig.model_validate(data)
        except ValidationError as exc:
            raise _config_error(exc) from exc
        return _resolve_paths(config, base_dir) if base_dir else config

    def validate_data(self, data: Any) -> Iterable[str]:
        return schema_errors(self._validator, data)

    @staticmethod
    def check_paths(config: ExperimentConfig) -> None:
        """Raise ConfigError for the first referenced input that is missing."""
        dataset = config.dataset.path
        if not dataset.is_dir():
            raise ConfigError(
                f"dataset directory {dataset} does not exist", "dataset.path"
            )
        for name in ("train.csv", "test.csv"):
            if not (dataset / name).is_file():
                raise ConfigError(f"{dataset / name} does not exist", "dataset.path")
        optional = {
            "attack.hset_file": config.attack.hset_file,
            "attack.names_file": config.attack.names_file,
            "glyph.checkpoint": config.glyph.checkpoint,
        }
        for field, value in optional.items():
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"{value} does not exist", field)
        for field, charset in (
            ("attack.charset", config.attack.charset),
            ("glyph.charset", config.glyph.charset),
        ):
            if charset not in NAMED_CHARSETS and not Path(charset).is_file():
                raise ConfigError(f"charset file {charset} does not exist", field)


NAMED_CHARSETS = ("letters", "desk")


def _resolve(base_dir: Path, value: Optional[Path]) -> Optional[Path]:
    if value is None or value.is_absolute():
        return value
    return base_dir / value


def _resolve_paths(config: ExperimentConfig, base_dir: Path) -> ExperimentConfig:
    update_attack: dict[str, Any] = {
        "hset_file": _resolve(base_dir, config.attack.hset_file),
        "names_file": _resolve(base_dir, config.attack.names_file),
    }
    if config.attack.charset not in NAMED_CHARSETS:
        update_attack["charset"] = str(_resolve(base_dir, Path(config.attack.charset)))
    update_glyph: dict[str, Any] = {
        "checkpoint": _resolve(base_dir, config.glyph.checkpoint)
    }
    if config.glyph.charset not in NAMED_CHARSETS:
        update_glyph["charset"] = str(_resolve(base_dir, Path(config.glyph.charset)))
    return config.model_copy(
        update={
            "output_dir": _resolve(base_dir, config.output_dir),
            "dataset": config.dataset.model_copy(
                update={"path": _resolve(base_dir, config.dataset.path)}
            ),
            "attack": config.attack.model_copy(update=update_attack),
            "glyph": config.glyph.model_copy(update=update_glyph),
        }
    )


def load_config(path: Union[str, Path], check_paths: bool = True) -> ExperimentConfig:
    """Shortcut for ConfigLoader().load_from_file(path)."""
    return ConfigLoader().load_from_file(path, check_paths=check_paths)
