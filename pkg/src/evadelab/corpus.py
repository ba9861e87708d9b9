"""Corpus ingestion: normalization, tokenization, sentence splitting,
vocabulary construction, and dataset cleanliness filters.

All text is NFC-normalized on ingest so character counts are stable for
downstream penalty rules. The tokenizer is a small scanner rather than a
regex soup: words keep internal apostrophes, @handles and #tags stay
single tokens, emoji are emitted one code point per token, and any other
non-space character becomes its own token. Joining tokens with single
spaces round-trips the text modulo whitespace.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field

from .emoji import is_emoji
from .errors import ConfigError, DataError, EmptyCorpus, EmptyText

UNK = "⟨unk⟩"
BOS = "⟨bos⟩"
EOS = "⟨eos⟩"
RESERVED = (UNK, BOS, EOS)
UNK_ID, BOS_ID, EOS_ID = 0, 1, 2

# Placeholder spliced into masked strings handed to infill scorers.
# Deliberately not part of any vocabulary.
MASK = "⟨mask⟩"

LABELS = frozenset({"human", "machine", "unlabeled"})

# Lowercased, dot-free forms that suppress a sentence split after ".".
# Single letters are absent on purpose: "A. B? C!" is three sentences.
ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "rev", "gen", "sen", "rep",
        "st", "jr", "sr", "vs", "etc", "inc", "ltd", "co", "corp",
        "dept", "univ", "assn", "bros", "fig", "figs", "eq", "eqs",
        "approx", "appt", "apt", "est", "min", "max", "misc", "no",
        "nos", "vol", "vols", "jan", "feb", "mar", "apr", "jun", "jul",
        "aug", "sep", "sept", "oct", "nov", "dec", "mon", "tue", "wed",
        "thu", "fri", "sat", "sun", "e.g", "i.e", "et al", "al", "cf",
        "ca", "resp",
    }
)

_APOSTROPHES = "'’"
_OPENERS = "\"'‘“([{"
_CLOSERS = "\"'’”)]}"
_TERMINATORS = ".!?"


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


@dataclass
class Document:
    """One corpus row: raw text plus provenance label and free-form meta."""

    id: str
    text: str
    label: str = "unlabeled"
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.text = unicodedata.normalize("NFC", self.text)
        if not self.text.strip():
            raise EmptyText(f"document {self.id!r} has no content")
        if self.label not in LABELS:
            raise ConfigError(f"unknown label {self.label!r}")


@dataclass
class FilterPolicy:
    """Cleanliness predicates applied verbatim, in order, to every doc.

    ``max_docs_per_source`` caps rows per ``meta['source']`` value
    (0 disables the cap); docs without a source share one bucket.
    """

    min_chars: int = 1
    max_chars: int = 100_000
    require_latin_majority: bool = False
    dedupe: bool = True
    max_docs_per_source: int = 0

    def __post_init__(self) -> None:
        if self.min_chars < 0 or self.max_chars < 0 or self.max_docs_per_source < 0:
            raise ConfigError("filter bounds must be non-negative")
        if self.min_chars > self.max_chars:
            raise ConfigError("min_chars exceeds max_chars")


class Vocabulary:
    """Dense bijective token↔index map with per-token corpus counts.

    Indices 0..2 are the reserved tokens; the remainder are sorted by
    descending count with ties broken alphabetically, so the most
    frequent real tokens occupy the lowest non-reserved indices.
    """

    def __init__(self, tokens: list[str], counts: list[int]):
        self.index_to_token = list(tokens)
        self.counts = list(counts)
        self.token_to_index = {t: i for i, t in enumerate(self.index_to_token)}
        if len(self.token_to_index) != len(self.index_to_token):
            raise ConfigError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, 0)

    def token(self, index: int) -> str:
        return self.index_to_token[index]

    def encode(self, tokens: list[str]) -> list[int]:
        get = self.token_to_index.get
        return [get(t, 0) for t in tokens]

    def decode(self, indices: list[int]) -> list[str]:
        return [self.index_to_token[i] for i in indices]

    def frequent_indices(self, limit: int) -> list[int]:
        """Indices of the ``limit`` most frequent non-reserved tokens."""
        top = min(limit, len(self.index_to_token) - len(RESERVED))
        return list(range(len(RESERVED), len(RESERVED) + top))


def tokenize(text: str) -> list[str]:
    """Scan NFC-normalized text into word, emoji, and symbol tokens."""
    text = unicodedata.normalize("NFC", text)
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "@#" and i + 1 < n and _is_word_char(text[i + 1]):
            j = i + 1
            while j < n and _is_word_char(text[j]):
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        if _is_word_char(ch):
            j = i + 1
            while j < n:
                if _is_word_char(text[j]):
                    j += 1
                elif (
                    text[j] in _APOSTROPHES
                    and j + 1 < n
                    and text[j + 1].isalpha()
                ):
                    j += 2
                else:
                    break
            tokens.append(text[i:j])
            i = j
            continue
        tokens.append(ch)
        i += 1
    return tokens


def detokenize(tokens: list[str]) -> str:
    return " ".join(tokens)


def _abbreviation_before(text: str, dot_index: int) -> bool:
    j = dot_index
    while j > 0 and (text[j - 1].isalpha() or text[j - 1] == "."):
        j -= 1
    word = text[j:dot_index].strip(".").casefold()
    return word in ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation, keeping it with its sentence.

    A run of ``.!?`` (plus trailing closers) ends a sentence when it is
    followed by end-of-text, or by whitespace and then an uppercase
    letter, digit, or opening quote. A lone period after an entry in
    ``ABBREVIATIONS`` never splits.
    """
    text = unicodedata.normalize("NFC", text)
    sentences: list[str] = []
    start = 0
    i, n = 0, len(text)
    while i < n:
        if text[i] not in _TERMINATORS:
            i += 1
            continue
        run_start = i
        while i < n and text[i] in _TERMINATORS:
            i += 1
        while i < n and text[i] in _CLOSERS:
            i += 1
        if text[run_start] == "." and i - run_start == 1:
            if _abbreviation_before(text, run_start):
                continue
        if i >= n:
            break
        if not text[i].isspace():
            continue
        k = i
        while k < n and text[k].isspace():
            k += 1
        if k < n and not (text[k].isupper() or text[k].isdigit() or text[k] in _OPENERS):
            continue
        piece = text[start:i].strip()
        if piece:
            sentences.append(piece)
        start = i
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _latin_majority(text: str) -> bool:
    letters = 0
    latin = 0
    for ch in text:
        if ch.isalpha():
            letters += 1
            if "LATIN" in unicodedata.name(ch, ""):
                latin += 1
    return letters > 0 and 2 * latin > letters


def filter_corpus(docs: list[Document], policy: FilterPolicy) -> list[Document]:
    """Apply all policy predicates, preserving order. Idempotent."""
    kept: list[Document] = []
    seen_texts: set[str] = set()
    per_source: dict[str, int] = {}
    for doc in docs:
        n_chars = len(doc.text)
        if n_chars < policy.min_chars or n_chars > policy.max_chars:
            continue
        if policy.require_latin_majority and not _latin_majority(doc.text):
            continue
        if policy.dedupe:
            if doc.text in seen_texts:
                continue
            seen_texts.add(doc.text)
        if policy.max_docs_per_source > 0:
            source = doc.meta.get("source", "")
            taken = per_source.get(source, 0)
            if taken >= policy.max_docs_per_source:
                continue
            per_source[source] = taken + 1
        kept.append(doc)
    return kept


def build_vocab(docs: list[Document], min_count: int = 1) -> Vocabulary:
    """Count tokens across docs and keep those seen ≥ ``min_count`` times."""
    if min_count < 1:
        raise ConfigError("min_count must be at least 1")
    freq: dict[str, int] = {}
    any_tokens = False
    for doc in docs:
        for token in tokenize(doc.text):
            any_tokens = True
            freq[token] = freq.get(token, 0) + 1
    if not any_tokens:
        raise EmptyCorpus("no document produced tokens")
    retained = sorted(
        ((t, c) for t, c in freq.items() if c >= min_count and t not in RESERVED),
        key=lambda item: (-item[1], item[0]),
    )
    tokens = list(RESERVED) + [t for t, _ in retained]
    counts = [0, 0, 0] + [c for _, c in retained]
    return Vocabulary(tokens, counts)


def load_documents(path: str) -> list[Document]:
    """Read one JSON object per line: {"id","text","label","meta"}."""
    docs: list[Document] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: bad JSON: {exc}") from exc
            if not isinstance(row, dict) or "id" not in row or "text" not in row:
                raise DataError(f"{path}:{line_no}: expected id/text fields")
            docs.append(
                Document(
                    id=str(row["id"]),
                    text=str(row["text"]),
                    label=str(row.get("label", "unlabeled")),
                    meta={str(k): str(v) for k, v in (row.get("meta") or {}).items()},
                )
            )
    return docs


def save_documents(docs: list[Document], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            row = {"id": doc.id, "text": doc.text, "label": doc.label, "meta": doc.meta}
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
