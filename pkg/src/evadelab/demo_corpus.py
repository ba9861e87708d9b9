"""Deterministic synthetic English corpus.

Experiments need a few hundred thousand tokens of clean, varied text
with realistic frequency structure, names for the entity protector, and
the odd hashtag or emoji for the penalty rules. This module builds one
from slot-filling templates over Zipf-weighted banks of real English
words, so corpora of any size are reproducible from a seed with no
downloads.

Two styles exist: "tweets" (one or two short sentences, occasional
decorations) and "answers" (single long declarative sentences, the
shape the paraphrase pipeline wants).
"""

from __future__ import annotations

import numpy as np

from .corpus import Document

ADJECTIVES = (
    "old", "small", "large", "young", "quiet", "bright", "ancient", "busy",
    "famous", "narrow", "gentle", "broken", "curious", "distant", "eager",
    "faded", "golden", "hollow", "idle", "jagged", "keen", "lonely",
    "modest", "noble", "pale", "rough", "silent", "tired", "vivid", "warm",
)

NOUNS = (
    "river", "village", "garden", "market", "bridge", "forest", "road",
    "house", "teacher", "farmer", "letter", "story", "window", "mountain",
    "harbor", "library", "kitchen", "engine", "valley", "festival",
    "painter", "orchard", "lantern", "meadow", "mill", "tower", "shore",
    "cellar", "tavern", "workshop", "bakery", "chapel", "stable", "well",
)

VERBS_PAST = (
    "crossed", "visited", "watched", "repaired", "opened", "followed",
    "painted", "carried", "reached", "remembered", "described", "filled",
    "guarded", "ignored", "joined", "kept", "lifted", "measured",
    "noticed", "observed", "praised", "questioned", "restored", "shared",
)

VERBS_BASE = (
    "cross", "visit", "watch", "repair", "open", "follow", "paint",
    "carry", "reach", "remember", "describe", "fill", "guard", "join",
    "lift", "measure", "notice", "observe", "praise", "restore",
)

ADVERBS = (
    "slowly", "quietly", "often", "rarely", "carefully", "suddenly",
    "early", "late", "together", "alone", "proudly", "gladly",
)

DETERMINERS = ("the", "this", "that", "every", "each", "some", "another", "one")

PREPOSITIONS = (
    "near", "beside", "behind", "under", "above", "around", "along",
    "within", "toward", "beyond",
)

CONJUNCTIONS = ("and", "but", "so", "yet", "while", "because", "although", "since")

PLACES = (
    "Avondale", "Brookfield", "Carmel", "Dunmore", "Eastport", "Fairview",
    "Glenwood", "Harborton", "Inverness", "Kingsford", "Lakewood",
    "Millbrook", "Northgate", "Oakdale", "Pinehurst", "Riverton",
)

NAMES = (
    "Alice", "Benjamin", "Clara", "Daniel", "Eleanor", "Frederick",
    "Grace", "Henry", "Isabel", "Jacob", "Katherine", "Lucas", "Margaret",
    "Nathan", "Olivia", "Patrick", "Rose", "Samuel", "Theresa", "Victor",
)

HASHTAGS = (
    "#travel", "#history", "#morning", "#harvest", "#weekend", "#market",
    "#riverside", "#sunset",
)

HANDLES = (
    "@alice", "@ben", "@clara", "@dan", "@ellie", "@fred", "@grace",
    "@henry",
)

EMOJI = ("🙂", "🌞", "🌊", "🍂", "🏡", "🎨", "🚂", "🌲")

NUMBERS = ("2", "3", "5", "7", "12", "40", "1890", "1901")

TWEET_FRAMES = (
    "{det} {adj} {noun} {prep} {det} {noun} {vpast} {adv} .",
    "{name} {vpast} {det} {adj} {noun} {prep} {place} .",
    "{det} {noun} {prep} {place} {vpast} {det} {adj} {noun} .",
    "{det} {adj} {noun} {adv} {vpast} {det} {noun} .",
    "{det} {noun} {vpast} {prep} {det} {adj} {noun} {adv} .",
    "{name} {prep} {place} {vpast} {det} {noun} {adv} .",
    "{det} {adj} {adj} {noun} {vpast} {det} {noun} {prep} {det} {noun} .",
    "{det} {noun} {prep} {det} {noun} {adv} {vpast} .",
    "{name} {adv} {vpast} {det} {adj} {noun} {prep} {det} {noun} .",
    "{det} {adj} {noun} {vpast} {det} {noun} {prep} {det} {adj} {noun} .",
)

# Answer frames are nearly all slots so that any two-token context has
# many observed continuations; rigid multi-word glue would make every
# single-token edit catastrophically unlikely under the trigram model.
ANSWER_FRAMES = (
    "{det} {adj} {noun} {prep} {det} {adj} {noun} {vpast} {det} {noun} "
    "{adv} , {conj} {det} {noun} {prep} {place} {vpast} {det} {adj} {noun} "
    ", {conj} {name} {adv} {vpast} {det} {adj} {noun} {prep} {det} {noun} .",
    "{prep} {det} {adj} {noun} , {det} {adj} {noun} {adv} {vpast} {det} "
    "{adj} {noun} , {conj} {det} {noun} {prep} {det} {noun} {vpast} {name} "
    "{prep} {det} {adj} {noun} {adv} .",
    "{det} {noun} {prep} {det} {noun} {vpast} {det} {adj} {adj} {noun} "
    "{prep} {place} , {conj} {det} {adj} {noun} {vpast} {adv} {prep} {det} "
    "{noun} , {conj} {det} {noun} {vpast} {det} {noun} {adv} .",
    "{name} {vpast} {det} {adj} {noun} {prep} {det} {noun} {adv} , {conj} "
    "{det} {noun} {prep} {det} {adj} {noun} {vpast} {det} {noun} {prep} "
    "{place} , {conj} {det} {adj} {noun} {adv} {vpast} .",
    "{det} {adj} {noun} {vpast} {prep} {det} {noun} {prep} {place} , "
    "{conj} {det} {adj} {noun} {prep} {det} {noun} {adv} {vpast} {det} "
    "{noun} , {conj} {name} {vpast} {det} {adj} {adj} {noun} {adv} .",
    "{prep} {det} {noun} {prep} {place} , {det} {adj} {noun} {vpast} {det} "
    "{noun} {prep} {det} {adj} {noun} , {conj} {det} {noun} {adv} {vpast} "
    "{det} {adj} {noun} {prep} {det} {noun} {adv} .",
)

QUESTION_FRAMES = (
    "{det} {adj} {noun} {prep} {det} {noun}",
    "{det} {noun} {prep} {place}",
    "{name} {vpast} {det} {adj} {noun}",
    "{det} {adj} {adj} {noun}",
    "{prep} {det} {noun} , {det} {noun}",
    "{det} {noun} {adv} {vpast} {det} {noun}",
)


def _zipf_cumulative(size: int, exponent: float = 1.1) -> np.ndarray:
    weights = 1.0 / np.power(np.arange(1, size + 1, dtype=np.float64), exponent)
    cumulative = np.cumsum(weights)
    return cumulative / cumulative[-1]


class _Bank:
    def __init__(self, words: tuple[str, ...], exponent: float = 1.1):
        self.words = words
        self.cumulative = _zipf_cumulative(len(words), exponent)

    def draw(self, rng: np.random.Generator) -> str:
        return self.words[int(np.searchsorted(self.cumulative, rng.random()))]


_BANKS = {
    "adj": _Bank(ADJECTIVES),
    "noun": _Bank(NOUNS),
    "vpast": _Bank(VERBS_PAST),
    "vbase": _Bank(VERBS_BASE),
    "adv": _Bank(ADVERBS),
    "det": _Bank(DETERMINERS),
    "prep": _Bank(PREPOSITIONS),
    "conj": _Bank(CONJUNCTIONS),
    "place": _Bank(PLACES),
    "name": _Bank(NAMES),
}


def _fill(frame: str, rng: np.random.Generator) -> str:
    out = []
    i = 0
    while i < len(frame):
        if frame[i] == "{":
            j = frame.index("}", i)
            out.append(_BANKS[frame[i + 1 : j]].draw(rng))
            i = j + 1
        else:
            out.append(frame[i])
            i += 1
    return "".join(out)


def _tweet(rng: np.random.Generator) -> str:
    frames = TWEET_FRAMES
    text = _fill(frames[int(rng.integers(len(frames)))], rng)
    if rng.random() < 0.25:
        text += " " + _fill(frames[int(rng.integers(len(frames)))], rng)
    roll = rng.random()
    if roll < 0.06:
        text += " " + HASHTAGS[int(rng.integers(len(HASHTAGS)))]
    elif roll < 0.10:
        text += " " + EMOJI[int(rng.integers(len(EMOJI)))]
    elif roll < 0.13:
        text = HANDLES[int(rng.integers(len(HANDLES)))] + " " + text
    elif roll < 0.16:
        text = text[:-1] + f"in {NUMBERS[int(rng.integers(len(NUMBERS)))]} ."
    return text


def _answer(rng: np.random.Generator) -> str:
    return _fill(ANSWER_FRAMES[int(rng.integers(len(ANSWER_FRAMES)))], rng)


def make_docs(
    n: int,
    style: str = "tweets",
    seed: int = 0,
    id_prefix: str = "doc",
    label: str = "human",
) -> list[Document]:
    """``n`` documents of the given style, reproducible from the seed."""
    if style not in ("tweets", "answers", "mixed"):
        raise ValueError(f"unknown style {style!r}")
    docs = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        if style == "tweets" or (style == "mixed" and i % 2 == 0):
            text = _tweet(rng)
        else:
            text = _answer(rng)
        docs.append(Document(id=f"{id_prefix}-{i}", text=text, label=label))
    return docs


def make_questions(n: int, seed: int = 0) -> list[str]:
    """Short prompt phrases whose completions read like answers."""
    questions = []
    for i in range(n):
        rng = np.random.default_rng([seed, 1000 + i])
        questions.append(_fill(QUESTION_FRAMES[int(rng.integers(len(QUESTION_FRAMES)))], rng))
    return questions


def word_dictionary() -> set[str]:
    """Every word the generator can emit, case-folded, plus the frame
    glue words."""
    words: set[str] = set()
    for bank in (
        ADJECTIVES,
        NOUNS,
        VERBS_PAST,
        VERBS_BASE,
        ADVERBS,
        DETERMINERS,
        PREPOSITIONS,
        CONJUNCTIONS,
        PLACES,
        NAMES,
    ):
        words.update(w.casefold() for w in bank)
    for frame in TWEET_FRAMES + ANSWER_FRAMES + QUESTION_FRAMES:
        for piece in frame.split():
            if piece.isalpha():
                words.add(piece.casefold())
    words.update(
        {
            "we", "they", "people", "from", "and", "in", "near", "the",
            "a", "was", "is", "this", "morning", "before", "opens",
            "beside", "still", "stands", "together", "every", "again",
            "whenever", "with", "many", "area", "believed", "that",
            "enough", "to", "after", "wanted", "season", "when", "seemed",
            "so", "decided", "once", "more", "for", "years", "although",
            "remained", "nobody", "alone", "of", "stayed", "there",
            "continued", "yet", "it", "promised", "during", "festival",
        }
    )
    return words
