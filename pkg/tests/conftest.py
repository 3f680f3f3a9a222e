"""
Pytest configuration and fixtures for glyphshield tests.

Font-dependent tests use the DejaVu Sans face installed on the machine and
are skipped when it cannot be found.
"""

from pathlib import Path

import pytest

from glyphshield.raster import FontFace, find_font_file, load_font
from glyphshield.runtime import set_runtime
from glyphshield.text.data import Dataset, TextSample


@pytest.fixture
def fixtures_dir() -> Path:
    """Return path to fixtures directory."""
    return Path(__file__).parent / "fixtures"


@pytest.fixture
def names_file(fixtures_dir: Path) -> Path:
    """UnicodeData.txt excerpt covering Latin b/B variants and a few others."""
    return fixtures_dir / "names" / "UnicodeData_excerpt.txt"


@pytest.fixture
def toy_dataset_dir(fixtures_dir: Path) -> Path:
    """Directory with a two-class train.csv/test.csv pair."""
    return fixtures_dir / "datasets" / "toy"


@pytest.fixture(scope="session")
def dejavu_path() -> Path:
    """Path of DejaVuSans.ttf, or skip when it is not installed."""
    path = find_font_file("DejaVuSans.ttf")
    if path is None:
        pytest.skip("DejaVu Sans is not installed")
    return path


@pytest.fixture(scope="session")
def dejavu(dejavu_path: Path) -> FontFace:
    return load_font(dejavu_path)


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Twelve short texts in two classes, easy to tell apart."""
    samples = []
    for i in range(6):
        samples.append(TextSample(0, f"apples and bananas {i} are sweet fruit"))
        samples.append(TextSample(1, f"quartz, onyx and jade {i} are stones"))
    return Dataset(samples=tuple(samples), num_classes=2, name="tiny")


@pytest.fixture(autouse=True)
def reset_runtime():
    """Every test starts from default runtime settings."""
    set_runtime()
    yield
    set_runtime()
