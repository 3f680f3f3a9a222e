"""Description-based neighbors (DCES).

Two characters are neighbors when their names share the case token and the
base letter: 'LATIN SMALL LETTER B' and 'LATIN SMALL LETTER B WITH STROKE'
both carry SMALL and B. Other tokens are ignored. CAPITAL outranks SMALL so
small-capital letters ('LATIN LETTER SMALL CAPITAL B') group with capitals.

Plain meaning: Characters whose official names say "same letter, same case".
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

from glyphshield.errors import NoBaseLetter, NoCaseToken, UnknownCodepoint
from glyphshield.spaces.models import NeighborSet
from glyphshield.spaces.names import NamesTable

CASE_TOKENS = ("CAPITAL", "SMALL")


def _is_base_letter(token: str) -> bool:
    return len(token) == 1 and "A" <= token <= "Z"


def dces_key(tokens: Sequence[str]) -> tuple[str, str]:
    """Return the (case token, base letter) pair of a name.

    The base letter is the first single-letter token after LETTER when the
    name has one, else the first single-letter token anywhere.

    Raises:
        NoCaseToken: No SMALL/CAPITAL token.
        NoBaseLetter: No single-letter A-Z token.
    """
    case = next((t for t in CASE_TOKENS if t in tokens), None)
    if case is None:
        raise NoCaseToken(f"{' '.join(tokens)!r} has no SMALL or CAPITAL token")

    start = tokens.index("LETTER") + 1 if "LETTER" in tokens else 0
    base = next((t for t in tokens[start:] if _is_base_letter(t)), None)
    if base is None:
        base = next((t for t in tokens if _is_base_letter(t)), None)
    if base is None:
        raise NoBaseLetter(f"{' '.join(tokens)!r} has no single-letter token")
    return case, base


def dces_neighbors(cp: int, table: NamesTable) -> NeighborSet:
    """List every other codepoint sharing cp's case token and base letter.

    Args:
        cp: Query codepoint.
        table: Parsed names table.

    Returns:
        NeighborSet ordered by codepoint, all similarities 1.0.

    Raises:
        UnknownCodepoint: cp has no name in the table.
        NoCaseToken: cp's name has no SMALL/CAPITAL token.
        NoBaseLetter: cp's name has no single-letter token.

    Example:
        >>> 0x180 in dces_neighbors(ord("b"), table).neighbors
        True

    Plain meaning: Look-alikes according to the Unicode names.
    """
    if cp not in table:
        raise UnknownCodepoint(cp)
    key = dces_key(table.tokens(cp))
    neighbors = tuple(other for other in table.dces_index.get(key, ()) if other != cp)
    return NeighborSet(
        codepoint=cp,
        neighbors=neighbors,
        similarities=tuple(1.0 for _ in neighbors),
    )


def dces_space(
    table: NamesTable, charset: Optional[Iterable[int]] = None
) -> dict[int, NeighborSet]:
    """DCES neighbor sets for every codepoint meeting the DCES preconditions."""
    cps = sorted(set(charset)) if charset is not None else list(table)
    result: dict[int, NeighborSet] = {}
    for cp in cps:
        try:
            result[cp] = dces_neighbors(cp, table)
        except (UnknownCodepoint, NoCaseToken, NoBaseLetter):
            continue
    return result
