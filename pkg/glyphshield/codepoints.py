"""Codepoint formatting and charset files.

Plain meaning: Read and write "U+0062"-style codepoints and character lists.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Union

_CP_PATTERN = re.compile(r"^U\+([0-9A-Fa-f]{4,6})$")
_RANGE_PATTERN = re.compile(r"^U\+([0-9A-Fa-f]{4,6})\.\.U\+([0-9A-Fa-f]{4,6})$")

MAX_CODEPOINT = 0x10FFFF


def is_scalar(cp: int) -> bool:
    """Return True for Unicode scalar values (surrogates excluded)."""
    return 0 <= cp <= MAX_CODEPOINT and not (0xD800 <= cp <= 0xDFFF)


def format_cp(cp: int) -> str:
    """Format a codepoint as U+XXXX (at least four hex digits)."""
    return f"U+{cp:04X}"


def parse_cp(text: str) -> int:
    """Parse "U+XXXX" (or a single literal character) into a codepoint.

    Raises:
        ValueError: If the text is neither form or not a Unicode scalar.
    """
    token = text.strip()
    match = _CP_PATTERN.match(token)
    if match:
        cp = int(match.group(1), 16)
    elif len(token) == 1:
        cp = ord(token)
    else:
        raise ValueError(f"Not a codepoint: {text!r}")
    if not is_scalar(cp):
        raise ValueError(f"Not a Unicode scalar value: {text!r}")
    return cp


def parse_charset_lines(lines: Iterable[str]) -> list[int]:
    """Parse charset lines into a sorted, de-duplicated codepoint list.

    Each non-comment line holds either U+XXXX, a range U+XXXX..U+YYYY, or a
    run of literal characters. Lines starting with '#' are comments.
    """
    found: set[int] = set()
    for raw in lines:
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        token = line.strip()
        match = _RANGE_PATTERN.match(token)
        if match:
            start, end = int(match.group(1), 16), int(match.group(2), 16)
            if end < start:
                raise ValueError(f"Empty range: {token}")
            found.update(cp for cp in range(start, end + 1) if is_scalar(cp))
        elif _CP_PATTERN.match(token):
            found.add(parse_cp(token))
        else:
            found.update(ord(ch) for ch in token if not ch.isspace())
    return sorted(found)


def read_charset(path: Union[str, Path]) -> list[int]:
    """Read a charset file (see parse_charset_lines)."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_charset_lines(text.splitlines())


def letters() -> list[int]:
    """Codepoints of a-z and A-Z."""
    return [ord(c) for c in "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"]


def desk_charset() -> list[int]:
    """Default desk-scale charset for the glyph classifier.

    Basic Latin letters and digits, the Latin-1 letters, the first half of
    Latin Extended-A, the head of Latin Extended-B, and the Greek and
    Cyrillic letters most often used as Latin look-alikes.
    """
    cps: set[int] = set()
    cps.update(range(0x30, 0x3A))
    cps.update(letters())
    cps.update(range(0xC0, 0x100))
    cps.discard(0xD7)
    cps.discard(0xF7)
    cps.update(range(0x100, 0x150))
    cps.update(range(0x180, 0x190))
    cps.update(
        ord(c)
        for c in "ΑΒΕΖΗΙΚΜΝΟΡΤΥΧαβγεικνορστυχ"
        "АВЕКМНОРСТХаеорсухіјѕԁһԛԝ"
    )
    return sorted(cps)
