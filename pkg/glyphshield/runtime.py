"""
Package-level runtime settings.

Serial mode, worker count and the on-disk cache location are process-wide
choices, configured once (usually by the CLI) and read by the modules that
parallelize or cache.

Plain meaning: Decide how much glyphshield may parallelize and where it caches.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

SEED_ENV_VAR = "PERTURB_SEED"


@dataclass(frozen=True)
class RuntimeSettings:
    """Process-wide execution settings.

    Args:
        serial: Force bit-reproducible single-worker execution.
        workers: Maximum worker threads for independent evaluation cells.
        cache_dir: Root directory for downloaded and derived artifacts.

    Plain meaning: How glyphshield should run on this machine.
    """

    serial: bool = False
    workers: int = 1
    cache_dir: Optional[Path] = None

    def effective_workers(self) -> int:
        """Return the worker count honoring serial mode."""
        if self.serial:
            return 1
        return max(1, self.workers)

    def resolve_cache_dir(self) -> Path:
        """Resolve the cache directory, defaulting to ~/.cache/glyphshield."""
        if self.cache_dir is not None:
            return self.cache_dir
        return Path.home() / ".cache" / "glyphshield"


_RUNTIME = RuntimeSettings()


def set_runtime(
    serial: bool = False,
    workers: int = 1,
    cache_dir: Optional[Union[str, Path]] = None,
) -> None:
    """Set package-wide runtime settings.

    Args:
        serial: Force single-worker, bit-reproducible execution.
        workers: Worker threads for parallel evaluation cells.
        cache_dir: Cache directory override.

    Raises:
        ValueError: If workers is smaller than 1.

    Plain meaning: Configure parallelism and caching for this process.
    """
    global _RUNTIME

    if workers < 1:
        raise ValueError("workers must be >= 1")
    normalized: Optional[Path] = None
    if cache_dir is not None:
        normalized = Path(cache_dir).expanduser().resolve()
    _RUNTIME = RuntimeSettings(serial=serial, workers=workers, cache_dir=normalized)


def get_runtime() -> RuntimeSettings:
    """Return the active runtime settings."""
    return _RUNTIME


def seed_from_env(default: Optional[int] = None) -> Optional[int]:
    """Read the fallback seed from the PERTURB_SEED environment variable.

    Args:
        default: Value returned when the variable is unset.

    Raises:
        ValueError: If the variable is set but not an integer.
    """
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
