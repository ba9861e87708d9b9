"""Emoji detection backed by a shipped code-point range table.

The table lives in ``data/emoji_ranges.tsv`` so the predicate can be
audited and extended without touching code. Ranges are half-keyed by
their first code point; membership is a binary search over the sorted
range starts followed by an upper-bound check.
"""

from __future__ import annotations

import bisect
from importlib import resources

_STARTS: list[int] = []
_ENDS: list[int] = []


def _load_ranges() -> None:
    text = (
        resources.files("evadelab")
        .joinpath("data/emoji_ranges.tsv")
        .read_text(encoding="utf-8")
    )
    pairs = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        first_hex, last_hex = line.split("\t")[:2]
        pairs.append((int(first_hex, 16), int(last_hex, 16)))
    pairs.sort()
    _STARTS.extend(p[0] for p in pairs)
    _ENDS.extend(p[1] for p in pairs)


_load_ranges()


def is_emoji(char: str) -> bool:
    """True iff ``char`` is a single code point inside the emoji table."""
    if len(char) != 1:
        return False
    cp = ord(char)
    i = bisect.bisect_right(_STARTS, cp) - 1
    return i >= 0 and cp <= _ENDS[i]


def count_emoji(tokens: list[str]) -> int:
    """Number of tokens that are single emoji code points."""
    return sum(1 for t in tokens if is_emoji(t))
