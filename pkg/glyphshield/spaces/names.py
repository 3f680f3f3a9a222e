"""
Unicode character names: parsing, download and the built-in fallback.

Names are read from UnicodeData.txt (semicolon-delimited, field 0 the hex
codepoint, field 1 the name). Bracketed labels such as "<control>" or the
"<CJK Ideograph, First>" range markers carry no name and are skipped.

Plain meaning: Know the official name of every character, word by word.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Union

import requests

from glyphshield.codepoints import is_scalar
from glyphshield.errors import (
    MalformedLine,
    NamesFetchError,
    NoBaseLetter,
    NoCaseToken,
)
from glyphshield.runtime import get_runtime

logger = logging.getLogger(__name__)

DEFAULT_UNICODE_VERSION = "11.0.0"
UNICODE_DATA_URL = "https://www.unicode.org/Public/{version}/ucd/UnicodeData.txt"
DEFAULT_USER_AGENT = "glyphshield/0.1.0 (names data fetch)"

# Names the bundled database derives algorithmically; UnicodeData.txt lists
# these blocks only as bracketed range markers.
_DERIVED_NAME_PREFIXES = (
    "CJK UNIFIED IDEOGRAPH-",
    "HANGUL SYLLABLE ",
    "TANGUT IDEOGRAPH-",
    "KHITAN SMALL SCRIPT CHARACTER-",
    "NUSHU CHARACTER-",
)


@dataclass(frozen=True)
class NamesTable:
    """Map codepoints to the whitespace-split tokens of their names.

    Args:
        entries: codepoint -> tuple of uppercase name tokens.
        source: Where the names came from (file path or "unicodedata").

    Example:
        >>> table.tokens(0x62)
        ('LATIN', 'SMALL', 'LETTER', 'B')

    Plain meaning: A dictionary of character names, split into words.
    """

    entries: Mapping[int, tuple[str, ...]]
    source: str = ""

    def __contains__(self, cp: object) -> bool:
        return cp in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.entries))

    def tokens(self, cp: int) -> tuple[str, ...]:
        return self.entries[cp]

    def name(self, cp: int) -> str:
        return " ".join(self.entries[cp])

    @cached_property
    def dces_index(self) -> dict[tuple[str, str], tuple[int, ...]]:
        """Codepoints grouped by (case token, base letter), ascending."""
        from glyphshield.spaces.dces import dces_key

        groups: dict[tuple[str, str], list[int]] = {}
        for cp in sorted(self.entries):
            try:
                key = dces_key(self.entries[cp])
            except (NoCaseToken, NoBaseLetter):
                continue
            groups.setdefault(key, []).append(cp)
        return {key: tuple(cps) for key, cps in groups.items()}


def parse_names_lines(lines: Iterable[str], source: str = "") -> NamesTable:
    """Parse UnicodeData.txt lines into a NamesTable.

    Raises:
        MalformedLine: With the 1-based line number of the first bad line.
    """
    entries: dict[int, tuple[str, ...]] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(";")
        if len(fields) < 2:
            raise MalformedLine("expected semicolon-separated fields", number)
        try:
            cp = int(fields[0], 16)
        except ValueError:
            raise MalformedLine(f"bad codepoint field {fields[0]!r}", number) from None
        if not is_scalar(cp):
            raise MalformedLine(f"codepoint {fields[0]} is not a scalar", number)
        name = fields[1].strip()
        if not name:
            raise MalformedLine("empty name field", number)
        if name.startswith("<"):
            continue
        entries[cp] = tuple(name.upper().split())
    return NamesTable(entries=entries, source=source)


def parse_names_list(file: Union[str, Path]) -> NamesTable:
    """Parse a UnicodeData.txt file.

    Args:
        file: Path to the names data file.

    Returns:
        NamesTable of every named codepoint.

    Raises:
        MalformedLine: If a line breaks the semicolon layout.
        OSError: If the file cannot be read.

    Example:
        >>> table = parse_names_list("UnicodeData.txt")
        >>> table.tokens(0x180)[-1]
        'STROKE'

    Plain meaning: Read the official Unicode names file.
    """
    path = Path(file)
    text = path.read_text(encoding="utf-8")
    table = parse_names_lines(text.splitlines(), source=str(path))
    logger.info("Parsed %d names from %s", len(table), path)
    return table


def names_table_from_unicodedata() -> NamesTable:
    """Build a NamesTable from the interpreter's bundled Unicode database.

    The bundled database follows the interpreter's Unicode version, not
    necessarily 11.0.0.
    """
    entries: dict[int, tuple[str, ...]] = {}
    for cp in range(0x110000):
        name = unicodedata.name(chr(cp), "")
        if not name or name.startswith(_DERIVED_NAME_PREFIXES):
            continue
        entries[cp] = tuple(name.split())
    source = f"unicodedata {unicodedata.unidata_version}"
    return NamesTable(entries=entries, source=source)


def fetch_names_list(
    version: str = DEFAULT_UNICODE_VERSION,
    cache_dir: Optional[Union[str, Path]] = None,
    force_refresh: bool = False,
    timeout: int = 60,
) -> Path:
    """Download UnicodeData.txt for a Unicode version, caching it on disk.

    Args:
        version: Unicode version directory on unicode.org.
        cache_dir: Cache root (default from the runtime settings).
        force_refresh: Download even when a cached copy exists.
        timeout: Request timeout in seconds.

    Returns:
        Path of the cached file.

    Raises:
        NamesFetchError: On any HTTP or network failure.

    Side effects:
        Network request and a file write under the cache directory.

    Plain meaning: Get the official names file once and keep it.
    """
    root = Path(cache_dir) if cache_dir else get_runtime().resolve_cache_dir()
    target = root / "names" / version / "UnicodeData.txt"
    if target.is_file() and not force_refresh:
        return target

    url = UNICODE_DATA_URL.format(version=version)
    try:
        response = requests.get(
            url, timeout=timeout, headers={"User-Agent": DEFAULT_USER_AGENT}
        )
        response.raise_for_status()
    except requests.Timeout:
        raise NamesFetchError(f"Download of {url} timed out after {timeout}s")
    except requests.RequestException as exc:
        raise NamesFetchError(f"Download of {url} failed: {exc}") from exc

    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(response.text, encoding="utf-8")
    logger.info("Cached Unicode %s names at %s", version, target)
    return target
