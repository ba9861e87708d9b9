"""Pluggable scorer contracts with deterministic local defaults and a
remote wire-protocol client.

Five tasks exist: detect, similarity, coherence, logloss, infill. The
local backends are classical stand-ins (TF-IDF cosine, standardized LM
log-probability squashed through a logistic, LM-sampled infilling); a
remote neural scorer can replace any of them through the HTTP protocol
without touching calling code.

Wire protocol: POST <endpoint>/score with a JSON body
{"id", "task", "texts" | "pairs" | "masked", "n_candidates"} where
exactly one input field is present for the task, answered by
{"id", "scores"} or, for infill, {"id", "candidates"}. The client never
retries: a failed call raises immediately so experiments stay
deterministic.
"""

from __future__ import annotations

import json
import math
import socket
import urllib.error
import urllib.request
import uuid
from dataclasses import dataclass

import numpy as np

from .corpus import MASK, RESERVED, tokenize
from .errors import (
    ConfigError,
    EmptyText,
    HttpStatusError,
    ProtocolError,
    ScorerError,
    ScorerTimeout,
)
from .decoding import truncate_nucleus, sample_index
from .ngram import NgramModel, log_loss

TASKS = ("detect", "similarity", "coherence", "logloss", "infill")

# Standard deviation floor shared by standardizing scorers.
_STD_FLOOR = 1e-6


@dataclass
class ScorerBinding:
    task: str
    backend: str = "local"
    endpoint: str = ""
    timeout_ms: int = 5000

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown scorer task {self.task!r}")
        if self.backend not in ("local", "remote"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "remote" and not self.endpoint:
            raise ConfigError("remote binding needs an endpoint")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive")


class TfidfSimilarity:
    """Cosine similarity of L2-normalized TF-IDF vectors.

    Terms are case-folded unigrams plus adjacent bigrams by default.
    With a reference corpus, IDF is ln((1+N)/(1+df)) + 1; without one
    every term weighs 1, so the measure reduces to plain TF cosine.
    """

    def __init__(self, reference: list[str] | None = None, use_bigrams: bool = True):
        self.use_bigrams = use_bigrams
        self._idf: dict[str, float] = {}
        self._default_idf = 1.0
        if reference:
            df: dict[str, int] = {}
            for text in reference:
                for term in set(self._terms(text)):
                    df[term] = df.get(term, 0) + 1
            n_docs = len(reference)
            self._idf = {
                t: math.log((1 + n_docs) / (1 + count)) + 1 for t, count in df.items()
            }
            self._default_idf = math.log(1 + n_docs) + 1

    def _terms(self, text: str) -> list[str]:
        tokens = [t.casefold() for t in tokenize(text)]
        terms = list(tokens)
        if self.use_bigrams:
            terms += [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        return terms

    def _vector(self, text: str) -> dict[str, float]:
        terms = self._terms(text)
        if not terms:
            raise EmptyText("similarity needs non-empty texts")
        weights: dict[str, float] = {}
        for term in terms:
            weights[term] = weights.get(term, 0.0) + 1.0
        for term in weights:
            weights[term] *= self._idf.get(term, self._default_idf)
        norm = math.sqrt(sum(w * w for w in weights.values()))
        return {t: w / norm for t, w in weights.items()}

    def __call__(self, a: str, b: str) -> float:
        va, vb = self._vector(a), self._vector(b)
        if len(vb) < len(va):
            va, vb = vb, va
        return sum(w * vb.get(t, 0.0) for t, w in va.items())

    def pairs(self, pairs: list[tuple[str, str]]) -> list[float]:
        return [self(a, b) for a, b in pairs]


class LmCoherence:
    """Logistic-squashed z-score of mean per-token LM log-probability.

    The reference corpus fixes the standardization: texts whose mean
    log-probability matches the reference mean score 0.5, fluent text
    scores higher, token soup lower.
    """

    def __init__(self, model: NgramModel, reference: list[str], gain: float = 1.0):
        if not reference:
            raise ConfigError("coherence reference corpus is empty")
        self.model = model
        self.gain = gain
        means = np.array([-log_loss(model, text) for text in reference])
        self.ref_mean = float(means.mean())
        self.ref_std = max(float(means.std(ddof=1)) if means.size > 1 else 0.0, _STD_FLOOR)

    def __call__(self, text: str) -> float:
        mean_lp = -log_loss(self.model, text)
        a = self.gain * (mean_lp - self.ref_mean) / self.ref_std
        # Branch keeps exp() arguments non-positive so extreme z-scores
        # saturate instead of overflowing.
        if a >= 0:
            return float(1.0 / (1.0 + math.exp(-a)))
        e = math.exp(a)
        return float(e / (1.0 + e))

    def batch(self, texts: list[str]) -> list[float]:
        return [self(t) for t in texts]


class LocalInfill:
    """Fill ⟨mask⟩ placeholders by sampling the base LM.

    Fills are drawn left to right at temperature 1 under nucleus 0.95
    with reserved tokens excluded; when the aligned original text is
    supplied, the token originally at each masked position is excluded
    too, so every fill is an actual replacement. Candidate j for input i
    uses an rng seeded from (seed, i, j), so output is a pure function
    of the call.
    """

    def __init__(self, model: NgramModel, seed: int = 0, top_p: float = 0.95):
        self.model = model
        self.seed = seed
        self.top_p = top_p

    def _fill_one(
        self, pieces: list[str], original: list[str] | None, rng: np.random.Generator
    ) -> str:
        reserved = [self.model.vocab.index(t) for t in RESERVED]
        aligned = original is not None and len(original) == len(pieces)
        context: list[int] = []
        out: list[str] = []
        for pos, piece in enumerate(pieces):
            if piece != MASK:
                out.append(piece)
                context.append(self.model.vocab.index(piece))
                continue
            probs = self.model.next_distribution_ids(context)
            probs[reserved] = 0.0
            if aligned:
                probs[self.model.vocab.index(original[pos])] = 0.0
            probs = probs / probs.sum()
            probs = truncate_nucleus(probs, self.top_p)
            token_id = sample_index(probs, rng)
            out.append(self.model.vocab.token(token_id))
            context.append(token_id)
        return " ".join(out)

    def __call__(
        self,
        masked: list[str],
        n_candidates: int,
        originals: list[str] | None = None,
    ) -> list[list[str]]:
        results: list[list[str]] = []
        for i, text in enumerate(masked):
            pieces = _mask_pieces(text)
            original = tokenize(originals[i]) if originals else None
            fills = []
            for j in range(n_candidates):
                rng = np.random.default_rng([self.seed, i, j])
                fills.append(self._fill_one(pieces, original, rng))
            results.append(fills)
        return results


def _mask_pieces(masked_text: str) -> list[str]:
    """Token stream of a masked string with ⟨mask⟩ kept whole."""
    pieces: list[str] = []
    for k, segment in enumerate(masked_text.split(MASK)):
        if k:
            pieces.append(MASK)
        pieces.extend(tokenize(segment))
    return pieces


class RankedInfill:
    """Deterministic infill: candidate j takes the (j+1)-th most probable
    vocabulary token at every masked position.

    Reserved tokens are never proposed; when the aligned original text is
    supplied, the token originally at each masked position is excluded as
    well. Ties rank by lower vocabulary index. This is the paraphrasing
    default, where reproducible candidate sets matter more than sampling
    variety.
    """

    def __init__(self, model: NgramModel):
        self.model = model

    def _rank_at(self, context: list[int], banned: set[int], rank: int) -> int:
        probs = self.model.next_distribution_ids(context)
        order = np.lexsort((np.arange(probs.size), -probs))
        kept = [int(i) for i in order if int(i) not in banned]
        return kept[min(rank, len(kept) - 1)]

    def _fill_one(self, pieces: list[str], original: list[str] | None, rank: int) -> str:
        reserved = {self.model.vocab.index(t) for t in RESERVED}
        context: list[int] = []
        out: list[str] = []
        aligned = original is not None and len(original) == len(pieces)
        for pos, piece in enumerate(pieces):
            if piece != MASK:
                out.append(piece)
                context.append(self.model.vocab.index(piece))
                continue
            banned = set(reserved)
            if aligned:
                banned.add(self.model.vocab.index(original[pos]))
            token_id = self._rank_at(context, banned, rank)
            out.append(self.model.vocab.token(token_id))
            context.append(token_id)
        return " ".join(out)

    def __call__(
        self,
        masked: list[str],
        n_candidates: int,
        originals: list[str] | None = None,
    ) -> list[list[str]]:
        results: list[list[str]] = []
        for i, text in enumerate(masked):
            pieces = _mask_pieces(text)
            original = tokenize(originals[i]) if originals else None
            results.append(
                [self._fill_one(pieces, original, j) for j in range(n_candidates)]
            )
        return results


def _score_bounds(task: str) -> tuple[float, float]:
    if task in ("detect", "coherence"):
        return 0.0, 1.0
    if task == "similarity":
        return -1.0, 1.0
    return -math.inf, math.inf


def remote_score(
    binding: ScorerBinding,
    texts: list[str] | None = None,
    pairs: list[tuple[str, str]] | None = None,
    masked: list[str] | None = None,
    n_candidates: int | None = None,
    request_id: str | None = None,
) -> list:
    """One POST to the bound endpoint; returns scores (or candidate
    lists for infill) aligned 1:1 with the inputs. No retries."""
    if binding.backend != "remote":
        raise ConfigError("remote_score needs a remote binding")
    inputs = [v for v in (texts, pairs, masked) if v is not None]
    if len(inputs) != 1:
        raise ConfigError("exactly one of texts/pairs/masked must be given")
    body: dict = {"id": request_id or str(uuid.uuid4()), "task": binding.task}
    if texts is not None:
        body["texts"] = list(texts)
    if pairs is not None:
        body["pairs"] = [[a, b] for a, b in pairs]
    if masked is not None:
        body["masked"] = list(masked)
        if binding.task == "infill":
            if not n_candidates or n_candidates < 1:
                raise ConfigError("infill needs n_candidates >= 1")
            body["n_candidates"] = n_candidates
    url = binding.endpoint.rstrip("/") + "/score"
    request = urllib.request.Request(
        url,
        data=json.dumps(body, ensure_ascii=False).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(request, timeout=binding.timeout_ms / 1000) as reply:
            raw = reply.read()
    except urllib.error.HTTPError as exc:
        raise HttpStatusError(exc.code) from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise ScorerTimeout(f"no reply within {binding.timeout_ms} ms") from exc
        raise ScorerError(f"request failed: {exc.reason}") from exc
    except (socket.timeout, TimeoutError) as exc:
        raise ScorerTimeout(f"no reply within {binding.timeout_ms} ms") from exc
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"response is not JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("id") != body["id"]:
        raise ProtocolError("response id missing or mismatched")
    expected = len(inputs[0])
    if binding.task == "infill":
        candidates = payload.get("candidates")
        if not isinstance(candidates, list) or len(candidates) != expected:
            raise ProtocolError("candidates missing or wrong length")
        for row in candidates:
            if not isinstance(row, list) or len(row) != n_candidates:
                raise ProtocolError("candidate row has wrong length")
            if not all(isinstance(c, str) for c in row):
                raise ProtocolError("candidate entries must be strings")
        return candidates
    scores = payload.get("scores")
    if not isinstance(scores, list) or len(scores) != expected:
        raise ProtocolError("scores missing or wrong length")
    low, high = _score_bounds(binding.task)
    checked = []
    for value in scores:
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ProtocolError(f"non-numeric score {value!r}")
        if not low <= value <= high:
            raise ProtocolError(f"score {value} outside [{low}, {high}]")
        checked.append(float(value))
    return checked


class RemoteTask:
    """Adapter giving a remote binding the local callables' shape."""

    def __init__(self, binding: ScorerBinding):
        self.binding = binding

    def texts(self, texts: list[str]) -> list[float]:
        return remote_score(self.binding, texts=texts)

    def pairs(self, pairs: list[tuple[str, str]]) -> list[float]:
        return remote_score(self.binding, pairs=pairs)

    def infill(
        self,
        masked: list[str],
        n_candidates: int,
        originals: list[str] | None = None,
    ) -> list[list[str]]:
        # The wire protocol carries masked strings only; originals are a
        # local-backend affordance and are dropped here.
        return remote_score(self.binding, masked=masked, n_candidates=n_candidates)


@dataclass
class ScorerSet:
    """The batch-shaped callables the pipelines consume.

    detect(texts) → P(machine) per text; similarity(pairs) → cosine per
    pair; coherence(texts) → acceptability per text; logloss(texts) →
    mean NLL per text; infill(masked, n) → n filled strings per input.
    """

    detect: object = None
    similarity: object = None
    coherence: object = None
    logloss: object = None
    infill: object = None


def local_scorer_set(
    model: NgramModel,
    reference: list[str],
    detector=None,
    use_bigrams: bool = True,
    coherence_gain: float = 1.0,
) -> ScorerSet:
    """Bundle the classical stand-ins around one base LM.

    ``detector`` is any callable mapping a text to P(machine); when
    omitted the detect slot stays empty and must be bound separately.
    The infill slot is the deterministic ranked filler.
    """
    sim = TfidfSimilarity(reference, use_bigrams=use_bigrams)
    coh = LmCoherence(model, reference, gain=coherence_gain)
    fill = RankedInfill(model)

    def detect_batch(texts: list[str]) -> list[float]:
        return [float(detector(t)) for t in texts]

    return ScorerSet(
        detect=detect_batch if detector is not None else None,
        similarity=sim.pairs,
        coherence=coh.batch,
        logloss=lambda texts: [log_loss(model, t) for t in texts],
        infill=fill,
    )


def remote_scorer_set(bindings: dict[str, ScorerBinding]) -> ScorerSet:
    """Bind remote endpoints per task; tasks absent stay None."""
    kit = ScorerSet()
    for task, binding in bindings.items():
        adapter = RemoteTask(binding)
        if task == "detect":
            kit.detect = adapter.texts
        elif task == "similarity":
            kit.similarity = adapter.pairs
        elif task == "coherence":
            kit.coherence = adapter.texts
        elif task == "logloss":
            kit.logloss = adapter.texts
        elif task == "infill":
            kit.infill = adapter.infill
    return kit
